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

#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace qtwin {

/// Maxwell capacitance matrix over labelled nodes, in farads.
///
/// Diagonal entries are total node capacitances (positive), off-diagonal
/// entries are minus the mutual capacitances (nonpositive). The constructor
/// rejects matrices that break the sign convention, are asymmetric beyond
/// 1e-6 relative, or have a negative row sum (negative capacitance to ground).
class CapacitanceMatrix {
   public:
    CapacitanceMatrix(std::vector<std::string> labels, Eigen::MatrixXd values);

    /// CSV layout: the first row holds a corner cell followed by node labels;
    /// every following row starts with its node label.
    static CapacitanceMatrix from_csv(std::istream &in);
    static CapacitanceMatrix load_csv(const std::filesystem::path &path);
    void write_csv(std::ostream &out) const;

    std::size_t size() const { return labels_.size(); }
    const std::vector<std::string> &labels() const { return labels_; }
    const Eigen::MatrixXd &values() const { return values_; }

    std::optional<std::size_t> index_of(const std::string &label) const;
    /// Throws InputError if the label is missing.
    std::size_t require(const std::string &label) const;
    double operator()(const std::string &row, const std::string &col) const;

    /// Mutual capacitance between two distinct nodes (nonnegative).
    double mutual(const std::string &a, const std::string &b) const;

    CapacitanceMatrix scaled(double factor) const;
    /// Drop a node, treating it as the reference.
    CapacitanceMatrix without(const std::string &label) const;

   private:
    std::vector<std::string> labels_;
    Eigen::MatrixXd values_;
};

}  // namespace qtwin
