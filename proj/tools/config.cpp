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


#include "config.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <fstream>
#include <sstream>

#include "qtwin/error.hpp"

namespace qtwin::cli {

Config::Config(nlohmann::json doc, std::filesystem::path base_dir)
    : owned_doc_(std::make_shared<nlohmann::json>(std::move(doc))),
      owned_resolved_(std::make_shared<nlohmann::json>(nlohmann::json::object())),
      doc_(owned_doc_.get()),
      resolved_(owned_resolved_.get()),
      base_(std::move(base_dir)) {
    if (!doc_->is_object()) throw ConfigError("config must be a JSON object");
}

Config::Config(const nlohmann::json *doc, nlohmann::json *resolved, std::string prefix, std::filesystem::path base)
    : doc_(doc), resolved_(resolved), prefix_(std::move(prefix)), base_(std::move(base)) {}

bool Config::has(const std::string &key) const { return doc_->contains(key); }

const nlohmann::json *Config::lookup(const std::string &key) {
    if (std::find(used_.begin(), used_.end(), key) == used_.end()) used_.push_back(key);
    const auto it = doc_->find(key);
    if (it == doc_->end() || it->is_null()) return nullptr;
    return &*it;
}

void Config::type_error(const std::string &key, const char *what) const {
    throw ConfigError("config key '" + prefix_ + key + "' must be " + what);
}

namespace {

nlohmann::json encode(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

}  // namespace

double Config::number(const std::string &key, double fallback) {
    const auto v = optional_number(key);
    if (!v) (*resolved_)[key] = encode(fallback);
    return v.value_or(fallback);
}

double Config::number(const std::string &key) {
    const auto v = optional_number(key);
    if (!v) throw ConfigError("missing config key '" + prefix_ + key + "'");
    return *v;
}

std::optional<double> Config::optional_number(const std::string &key) {
    const auto *j = lookup(key);
    if (!j) return std::nullopt;
    (*resolved_)[key] = *j;
    if (j->is_number()) return j->get<double>();
    if (j->is_string() && j->get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
    if (j->is_string() && j->get<std::string>() == "-inf") return -std::numeric_limits<double>::infinity();
    type_error(key, "a number");
}

long Config::integer(const std::string &key, long fallback) {
    const auto *j = lookup(key);
    if (!j) {
        (*resolved_)[key] = fallback;
        return fallback;
    }
    if (!j->is_number_integer()) type_error(key, "an integer");
    (*resolved_)[key] = *j;
    return j->get<long>();
}

bool Config::boolean(const std::string &key, bool fallback) {
    const auto *j = lookup(key);
    if (!j) {
        (*resolved_)[key] = fallback;
        return fallback;
    }
    if (!j->is_boolean()) type_error(key, "true or false");
    (*resolved_)[key] = *j;
    return j->get<bool>();
}

std::string Config::string(const std::string &key, const std::string &fallback) {
    const auto *j = lookup(key);
    if (!j) {
        (*resolved_)[key] = fallback;
        return fallback;
    }
    if (!j->is_string()) type_error(key, "a string");
    (*resolved_)[key] = *j;
    return j->get<std::string>();
}

std::string Config::string(const std::string &key) {
    const auto *j = lookup(key);
    if (!j) throw ConfigError("missing config key '" + prefix_ + key + "'");
    if (!j->is_string()) type_error(key, "a string");
    (*resolved_)[key] = *j;
    return j->get<std::string>();
}

std::vector<double> Config::numbers(const std::string &key, const std::vector<double> &fallback) {
    const auto *j = lookup(key);
    if (!j) {
        (*resolved_)[key] = fallback;
        return fallback;
    }
    if (!j->is_array() || !std::all_of(j->begin(), j->end(), [](const auto &x) { return x.is_number(); }))
        type_error(key, "an array of numbers");
    (*resolved_)[key] = *j;
    return j->get<std::vector<double>>();
}

std::vector<std::string> Config::strings(const std::string &key) {
    const auto *j = lookup(key);
    if (!j) throw ConfigError("missing config key '" + prefix_ + key + "'");
    if (!j->is_array() || !std::all_of(j->begin(), j->end(), [](const auto &x) { return x.is_string(); }))
        type_error(key, "an array of strings");
    (*resolved_)[key] = *j;
    return j->get<std::vector<std::string>>();
}

void Config::set_resolved(const std::string &key, nlohmann::json value) {
    lookup(key);
    (*resolved_)[key] = std::move(value);
}

std::filesystem::path Config::path(const std::string &key) {
    const std::filesystem::path p = string(key);
    return p.is_absolute() ? p : base_ / p;
}

Config &Config::child(const std::string &key) {
    static const nlohmann::json kEmpty = nlohmann::json::object();
    const auto *j = lookup(key);
    if (j && !j->is_object()) type_error(key, "an object");
    (*resolved_)[key] = nlohmann::json::object();
    children_.push_back(std::unique_ptr<Config>(new Config(j ? j : &kEmpty, &(*resolved_)[key], prefix_ + key + ".", base_)));
    return *children_.back();
}

std::vector<Config *> Config::children(const std::string &key) {
    const auto *j = lookup(key);
    if (!j) throw ConfigError("missing config key '" + prefix_ + key + "'");
    if (!j->is_array()) type_error(key, "an array of objects");
    auto &arr = (*resolved_)[key];
    arr = nlohmann::json::array();
    for (std::size_t k = 0; k < j->size(); ++k) arr.push_back(nlohmann::json::object());
    std::vector<Config *> out;
    for (std::size_t k = 0; k < j->size(); ++k) {
        const auto &item = (*j)[k];
        const std::string name = prefix_ + key + "[" + std::to_string(k) + "].";
        if (!item.is_object()) throw ConfigError("config key '" + name.substr(0, name.size() - 1) + "' must be an object");
        children_.push_back(std::unique_ptr<Config>(new Config(&item, &arr[k], name, base_)));
        out.push_back(children_.back().get());
    }
    return out;
}

void Config::finish() const {
    for (const auto &[key, value] : doc_->items()) {
        if (std::find(used_.begin(), used_.end(), key) == used_.end())
            throw ConfigError("unknown config key '" + prefix_ + key + "'");
    }
    for (const auto &c : children_) c->finish();
}

nlohmann::json load_config_file(const std::filesystem::path &path) {
    if (path.empty()) return nlohmann::json::object();
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config file: " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error &e) {
        throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
}

}  // namespace qtwin::cli
