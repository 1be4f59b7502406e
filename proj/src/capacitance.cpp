// Copyright 2026 The qtwin Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "qtwin/capacitance.hpp"

#include <cmath>
#include <fstream>
#include <ostream>
#include <set>

#include "qtwin/error.hpp"
#include "qtwin/io.hpp"

namespace qtwin {

CapacitanceMatrix::CapacitanceMatrix(std::vector<std::string> labels, Eigen::MatrixXd values)
    : labels_(std::move(labels)), values_(std::move(values)) {
    const auto n = static_cast<Eigen::Index>(labels_.size());
    if (n == 0) {
        throw InputError("capacitance matrix is empty");
    }
    if (values_.rows() != n || values_.cols() != n) {
        throw InputError("capacitance matrix shape does not match its label count");
    }
    std::set<std::string> seen(labels_.begin(), labels_.end());
    if (seen.size() != labels_.size()) {
        throw InputError("capacitance matrix has duplicate node labels");
    }
    if (!values_.allFinite()) {
        throw InputError("capacitance matrix contains non-finite entries");
    }
    const double scale = values_.diagonal().cwiseAbs().maxCoeff();
    const double tol = 1e-6 * scale;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(values_(i, i) > 0.0)) {
            throw InputError("capacitance matrix diagonal must be positive (node '" + labels_[i] + "')");
        }
        double row_sum = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            row_sum += values_(i, j);
            if (i == j) {
                continue;
            }
            if (values_(i, j) > tol) {
                throw InputError("Maxwell convention violated: positive off-diagonal between '" + labels_[i] +
                                 "' and '" + labels_[j] + "'");
            }
            if (std::abs(values_(i, j) - values_(j, i)) > tol) {
                throw InputError("capacitance matrix is not symmetric ('" + labels_[i] + "', '" + labels_[j] + "')");
            }
        }
        if (row_sum < -tol) {
            throw InputError("capacitance matrix row '" + labels_[i] + "' has a negative sum (not diagonally dominant)");
        }
    }
    // Store the exactly symmetric part.
    values_ = 0.5 * (values_ + values_.transpose()).eval();
}

CapacitanceMatrix CapacitanceMatrix::from_csv(std::istream &in) {
    auto rows = read_csv_rows(in);
    if (rows.size() < 2) {
        throw InputError("capacitance CSV needs a header row and at least one data row");
    }
    const auto &header = rows.front();
    std::vector<std::string> labels(header.begin() + 1, header.end());
    if (rows.size() - 1 != labels.size()) {
        throw InputError("capacitance CSV must be square: " + std::to_string(labels.size()) + " labels, " +
                         std::to_string(rows.size() - 1) + " rows");
    }
    const auto n = static_cast<Eigen::Index>(labels.size());
    Eigen::MatrixXd values(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto &row = rows[static_cast<std::size_t>(i) + 1];
        if (row.size() != labels.size() + 1) {
            throw InputError("capacitance CSV row " + std::to_string(i + 1) + " has the wrong number of cells");
        }
        if (row.front() != labels[static_cast<std::size_t>(i)]) {
            throw InputError("capacitance CSV row label '" + row.front() + "' does not match column label '" +
                             labels[static_cast<std::size_t>(i)] + "'");
        }
        for (Eigen::Index j = 0; j < n; ++j) {
            values(i, j) = parse_double(row[static_cast<std::size_t>(j) + 1], "capacitance entry");
        }
    }
    return CapacitanceMatrix(std::move(labels), std::move(values));
}

CapacitanceMatrix CapacitanceMatrix::load_csv(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot open capacitance matrix file: " + path.string());
    }
    return from_csv(in);
}

void CapacitanceMatrix::write_csv(std::ostream &out) const {
    out << "node";
    for (const auto &l : labels_) {
        out << ',' << l;
    }
    out << '\n';
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        out << labels_[i];
        for (std::size_t j = 0; j < labels_.size(); ++j) {
            out << ',' << format_double(values_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        }
        out << '\n';
    }
}

std::optional<std::size_t> CapacitanceMatrix::index_of(const std::string &label) const {
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        if (labels_[i] == label) {
            return i;
        }
    }
    return std::nullopt;
}

std::size_t CapacitanceMatrix::require(const std::string &label) const {
    auto idx = index_of(label);
    if (!idx) {
        throw InputError("capacitance matrix has no node labelled '" + label + "'");
    }
    return *idx;
}

double CapacitanceMatrix::operator()(const std::string &row, const std::string &col) const {
    return values_(static_cast<Eigen::Index>(require(row)), static_cast<Eigen::Index>(require(col)));
}

double CapacitanceMatrix::mutual(const std::string &a, const std::string &b) const {
    if (a == b) {
        throw InputError("mutual capacitance needs two distinct nodes");
    }
    return -(*this)(a, b);
}

CapacitanceMatrix CapacitanceMatrix::scaled(double factor) const {
    if (!(factor > 0.0)) {
        throw DomainError("capacitance scale factor must be positive");
    }
    return CapacitanceMatrix(labels_, values_ * factor);
}

CapacitanceMatrix CapacitanceMatrix::without(const std::string &label) const {
    const auto drop = static_cast<Eigen::Index>(require(label));
    if (labels_.size() == 1) {
        throw InputError("cannot drop the only node of a capacitance matrix");
    }
    const auto n = static_cast<Eigen::Index>(labels_.size());
    std::vector<std::string> labels;
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (i != drop) {
            keep.push_back(i);
            labels.push_back(labels_[static_cast<std::size_t>(i)]);
        }
    }
    Eigen::MatrixXd reduced(n - 1, n - 1);
    for (Eigen::Index i = 0; i < n - 1; ++i) {
        for (Eigen::Index j = 0; j < n - 1; ++j) {
            reduced(i, j) = values_(keep[static_cast<std::size_t>(i)], keep[static_cast<std::size_t>(j)]);
        }
    }
    return CapacitanceMatrix(std::move(labels), std::move(reduced));
}

}  // namespace qtwin
