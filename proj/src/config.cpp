// Copyright 2026 The Agrifed Authors
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

#include "agrifed/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

#include "agrifed/errors.hpp"
#include "agrifed/rng.hpp"

namespace agrifed::config {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      parts.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(trim(cur));
  parts.erase(std::remove(parts.begin(), parts.end(), std::string()), parts.end());
  return parts;
}

[[noreturn]] void bad(const std::string& key, const std::string& msg) {
  throw ConfigError(key, msg);
}

double parse_double(const std::string& key, const std::string& v) {
  if (v == "inf" || v == "+inf") return std::numeric_limits<double>::infinity();
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size()) bad(key, "expected a number, got '" + v + "'");
  return out;
}

long long parse_ll(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const long long out = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || end != v.c_str() + v.size())
    bad(key, "expected an integer, got '" + v + "'");
  return out;
}

int parse_int(const std::string& key, const std::string& v) {
  return static_cast<int>(parse_ll(key, v));
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const unsigned long long out = std::strtoull(v.c_str(), &end, 10);
  if (v.empty() || end != v.c_str() + v.size())
    bad(key, "expected an unsigned integer, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad(key, "expected true/false, got '" + v + "'");
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename T, typename F>
std::string join(const std::vector<T>& items, F fmt) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out.push_back(',');
    out += fmt(items[i]);
  }
  return out;
}

const std::vector<std::string>& known_regimes() {
  static const std::vector<std::string> names = {
      "traditional_pooled", "local_only", "model_sharing",
      "model_sharing_ldp",  "federated",  "federated_ldp"};
  return names;
}

// Schema: one setter + one getter per key; the same table drives parsing,
// overrides, and the canonical dump.
struct KeySpec {
  std::function<void(ParsedConfig&, const std::string& key, const std::string&)> set;
  std::function<std::string(const ParsedConfig&)> get;
};

const std::map<std::string, KeySpec>& schema() {
  static const std::map<std::string, KeySpec> table = [] {
    std::map<std::string, KeySpec> t;

    t["experiment.name"] = {
        [](ParsedConfig& c, const std::string&, const std::string& v) { c.name = v; },
        [](const ParsedConfig& c) { return c.name; }};
    t["experiment.seeds"] = {
        [](ParsedConfig& c, const std::string& k, const std::string& v) {
          c.seeds.clear();
          for (const auto& p : split_list(v)) c.seeds.push_back(parse_u64(k, p));
          if (c.seeds.empty()) bad(k, "at least one seed required");
        },
        [](const ParsedConfig& c) {
          return join(c.seeds, [](std::uint64_t s) { return std::to_string(s); });
        }};
    t["experiment.test_years"] = {
        [](ParsedConfig& c, const std::string& k, const std::string& v) {
          c.test_years.clear();
          for (const auto& p : split_list(v)) c.test_years.push_back(parse_int(k, p));
          if (c.test_years.empty()) bad(k, "at least one test year required");
        },
        [](const ParsedConfig& c) {
          return join(c.test_years, [](int y) { return std::to_string(y); });
        }};
    t["experiment.regimes"] = {
        [](ParsedConfig& c, const std::string& k, const std::string& v) {
          c.regimes = split_list(v);
          if (c.regimes.empty()) bad(k, "at least one regime required");
          for (const auto& r : c.regimes)
            if (std::find(known_regimes().begin(), known_regimes().end(), r) ==
                known_regimes().end())
              bad(k, "unknown regime '" + r + "'");
        },
        [](const ParsedConfig& c) {
          return join(c.regimes, [](const std::string& r) { return r; });
        }};
    t["experiment.threads"] = {
        [](ParsedConfig& c, const std::string& k, const std::string& v) {
          c.threads = parse_int(k, v);
          if (c.threads < 1) bad(k, "threads must be >= 1");
        },
        [](const ParsedConfig& c) { return std::to_string(c.threads); }};
    t["experiment.normalization"] = {
        [](ParsedConfig& c, const std::string& k, const std::string& v) {
          if (v == "per_silo")
            c.normalization = data::NormalizationMode::per_silo;
          else if (v == "global")
            c.normalization = data::NormalizationMode::global;
          else
            bad(k, "expected per_silo or global, got '" + v + "'");
        },
        [](const ParsedConfig& c) {
          return c.normalization == data::NormalizationMode::per_silo ? "per_silo"
                                                                      : "global";
        }};

    t["data.source"] = {
        [](ParsedConfig& c, const std::string& k, const std::string& v) {
          if (v == "synthetic")
            c.source = ParsedConfig::Source::synthetic;
          else if (v == "csv")
            c.source = ParsedConfig::Source::csv;
          else
            bad(k, "expected synthetic or csv, got '" + v + "'");
        },
        [](const ParsedConfig& c) {
          return c.source == ParsedConfig::Source::synthetic ? "synthetic" : "csv";
        }};
    t["data.csv_path"] = {
        [](ParsedConfig& c, const std::string&, const std::string& v) {
          c.csv_path = v;
        },
        [](const ParsedConfig& c) { return c.csv_path; }};
    t["data.feature_columns"] = {
        [](ParsedConfig& c, const std::string&, const std::string& v) {
          c.csv_schema.feature_columns = split_list(v);
        },
        [](const ParsedConfig& c) {
          return join(c.csv_schema.feature_columns,
                      [](const std::string& s) { return s; });
        }};
    t["data.target_column"] = {
        [](ParsedConfig& c, const std::string&, const std::string& v) {
          c.csv_schema.target_column = v;
        },
        [](const ParsedConfig& c) { return c.csv_schema.target_column; }};
    t["data.year_column"] = {
        [](ParsedConfig& c, const std::string&, const std::string& v) {
          c.csv_schema.year_column = v;
        },
        [](const ParsedConfig& c) { return c.csv_schema.year_column; }};
    t["data.silo_column"] = {
        [](ParsedConfig& c, const std::string&, const std::string& v) {
          c.csv_schema.silo_column = v;
        },
        [](const ParsedConfig& c) { return c.csv_schema.silo_column; }};
    t["data.lat_column"] = {
        [](ParsedConfig& c, const std::string&, const std::string& v) {
          c.csv_schema.lat_column = v;
        },
        [](const ParsedConfig& c) { return c.csv_schema.lat_column; }};
    t["data.lon_column"] = {
        [](ParsedConfig& c, const std::string&, const std::string& v) {
          c.csv_schema.lon_column = v;
        },
        [](const ParsedConfig& c) { return c.csv_schema.lon_column; }};

    t["synthetic.n_silos"] = {
        [](ParsedConfig& c, const std::string& k, const std::string& v) {
          c.generator.n_silos = parse_int(k, v);
        },
        [](const ParsedConfig& c) { return std::to_string(c.generator.n_silos); }};
    t["synthetic.per_silo_n"] = {
        [](ParsedConfig& c, const std::string& k, const std::string& v) {
          c.generator.per_silo_n = parse_int(k, v);
        },
        [](const ParsedConfig& c) { return std::to_string(c.generator.per_silo_n); }};
    t["synthetic.feature_dim"] = {
        [](ParsedConfig& c, const std::string& k, const std::string& v) {
          c.generator.feature_dim = parse_int(k, v);
        },
        [](const ParsedConfig& c) { return std::to_string(c.generator.feature_dim); }};
    t["synthetic.scale"] = {
        [](ParsedConfig& c, const std::string& k, const std::string& v) {
          c.scale_raw.clear();
          for (const auto& p : split_list(v)) c.scale_raw.push_back(parse_double(k, p));
          if (c.scale_raw.empty()) bad(k, "expected one value or a list");
        },
        [](const ParsedConfig& c) { return join(c.scale_raw, fmt_double); }};
    t["synthetic.offset"] = {
        [](ParsedConfig& c, const std::string& k, const std::string& v) {
          c.offset_raw.clear();
          for (const auto& p : split_list(v))
            c.offset_raw.push_back(parse_double(k, p));
          if (c.offset_raw.empty()) bad(k, "expected one value or a list");
        },
        [](const ParsedConfig& c) { return join(c.offset_raw, fmt_double); }};
    t["synthetic.concept_magnitude"] = {
        [](ParsedConfig& c, const std::string& k, const std::string& v) {
          c.generator.shift.concept_magnitude = parse_double(k, v);
        },
        [](const ParsedConfig& c) {
          return fmt_double(c.generator.shift.concept_magnitude);
        }};
    t["synthetic.noise_std"] = {
        [](ParsedConfig& c, const std::string& k, const std::string& v) {
          c.generator.shift.noise_std = parse_double(k, v);
        },
        [](const ParsedConfig& c) { return fmt_double(c.generator.shift.noise_std); }};
    t["synthetic.geo_layout"] = {
        [](ParsedConfig& c, const std::string& k, const std::string& v) {
          if (v == "grid")
            c.generator.geo_layout = data::GeoLayout::grid;
          else if (v == "random")
            c.generator.geo_layout = data::GeoLayout::random;
          else
            bad(k, "expected grid or random, got '" + v + "'");
        },
        [](const ParsedConfig& c) {
          return c.generator.geo_layout == data::GeoLayout::grid ? "grid" : "random";
        }};
    t["synthetic.year_min"] = {
        [](ParsedConfig& c, const std::string& k, const std::string& v) {
          c.generator.year_min = parse_int(k, v);
        },
        [](const ParsedConfig& c) { return std::to_string(c.generator.year_min); }};
    t["synthetic.year_max"] = {
        [](ParsedConfig& c, const std::string& k, const std::string& v) {
          c.generator.year_max = parse_int(k, v);
        },
        [](const ParsedConfig& c) { return std::to_string(c.generator.year_max); }};

    t["model.hidden"] = {
        [](ParsedConfig& c, const std::string& k, const std::string& v) {
          c.hidden.clear();
          for (const auto& p : split_list(v)) {
            const int w = parse_int(k, p);
            if (w < 1) bad(k, "layer widths must be >= 1");
            c.hidden.push_back(w);
          }
          if (c.hidden.empty()) bad(k, "at least one hidden layer required");
        },
        [](const ParsedConfig& c) {
          return join(c.hidden, [](int w) { return std::to_string(w); });
        }};
    t["model.use_bn"] = {
        [](ParsedConfig& c, const std::string& k, const std::string& v) {
          c.use_bn = parse_bool(k, v);
        },
        [](const ParsedConfig& c) { return c.use_bn ? "true" : "false"; }};

    t["federation.rounds"] = {
        [](ParsedConfig& c, const std::string& k, const std::string& v) {
          c.federation.rounds = parse_ll(k, v);
        },
        [](const ParsedConfig& c) { return std::to_string(c.federation.rounds); }};
    t["federation.fraction"] = {
        [](ParsedConfig& c, const std::string& k, const std::string& v) {
          c.federation.fraction = parse_double(k, v);
        },
        [](const ParsedConfig& c) { return fmt_double(c.federation.fraction); }};
    t["federation.local_epochs"] = {
        [](ParsedConfig& c, const std::string& k, const std::string& v) {
          c.federation.local_epochs = parse_ll(k, v);
        },
        [](const ParsedConfig& c) {
          return std::to_string(c.federation.local_epochs);
        }};
    t["federation.batch_size"] = {
        [](ParsedConfig& c, const std::string& k, const std::string& v) {
          c.federation.batch_size = parse_ll(k, v);
        },
        [](const ParsedConfig& c) { return std::to_string(c.federation.batch_size); }};
    t["federation.lr"] = {
        [](ParsedConfig& c, const std::string& k, const std::string& v) {
          c.federation.lr.base = parse_double(k, v);
        },
        [](const ParsedConfig& c) { return fmt_double(c.federation.lr.base); }};
    t["federation.lr_decay_points"] = {
        [](ParsedConfig& c, const std::string& k, const std::string& v) {
          c.federation.lr.decay_points.clear();
          for (const auto& p : split_list(v))
            c.federation.lr.decay_points.push_back(parse_ll(k, p));
        },
        [](const ParsedConfig& c) {
          return join(c.federation.lr.decay_points,
                      [](long long p) { return std::to_string(p); });
        }};
    t["federation.lr_decay_factor"] = {
        [](ParsedConfig& c, const std::string& k, const std::string& v) {
          c.federation.lr.factor = parse_double(k, v);
        },
        [](const ParsedConfig& c) { return fmt_double(c.federation.lr.factor); }};
    t["federation.aggregation"] = {
        [](ParsedConfig& c, const std::string& k, const std::string& v) {
          if (v == "fedavg")
            c.federation.aggregation = fed::Aggregation::fedavg;
          else if (v == "fedbn")
            c.federation.aggregation = fed::Aggregation::fedbn;
          else
            bad(k, "expected fedavg or fedbn, got '" + v + "'");
        },
        [](const ParsedConfig& c) {
          return c.federation.aggregation == fed::Aggregation::fedavg ? "fedavg"
                                                                      : "fedbn";
        }};
    t["federation.early_stopping"] = {
        [](ParsedConfig& c, const std::string& k, const std::string& v) {
          c.federation.early_stopping.enabled = parse_bool(k, v);
        },
        [](const ParsedConfig& c) {
          return c.federation.early_stopping.enabled ? "true" : "false";
        }};
    t["federation.patience"] = {
        [](ParsedConfig& c, const std::string& k, const std::string& v) {
          c.federation.early_stopping.patience = parse_int(k, v);
        },
        [](const ParsedConfig& c) {
          return std::to_string(c.federation.early_stopping.patience);
        }};

    t["local.epochs"] = {
        [](ParsedConfig& c, const std::string& k, const std::string& v) {
          c.local.epochs = parse_ll(k, v);
        },
        [](const ParsedConfig& c) { return std::to_string(c.local.epochs); }};
    t["local.batch_size"] = {
        [](ParsedConfig& c, const std::string& k, const std::string& v) {
          c.local.batch_size = parse_ll(k, v);
        },
        [](const ParsedConfig& c) { return std::to_string(c.local.batch_size); }};
    t["local.lr"] = {
        [](ParsedConfig& c, const std::string& k, const std::string& v) {
          c.local.lr.base = parse_double(k, v);
        },
        [](const ParsedConfig& c) { return fmt_double(c.local.lr.base); }};
    t["local.lr_decay_points"] = {
        [](ParsedConfig& c, const std::string& k, const std::string& v) {
          c.local.lr.decay_points.clear();
          for (const auto& p : split_list(v))
            c.local.lr.decay_points.push_back(parse_ll(k, p));
        },
        [](const ParsedConfig& c) {
          return join(c.local.lr.decay_points,
                      [](long long p) { return std::to_string(p); });
        }};
    t["local.lr_decay_factor"] = {
        [](ParsedConfig& c, const std::string& k, const std::string& v) {
          c.local.lr.factor = parse_double(k, v);
        },
        [](const ParsedConfig& c) { return fmt_double(c.local.lr.factor); }};
    t["local.early_stopping"] = {
        [](ParsedConfig& c, const std::string& k, const std::string& v) {
          c.local.early_stopping.enabled = parse_bool(k, v);
        },
        [](const ParsedConfig& c) {
          return c.local.early_stopping.enabled ? "true" : "false";
        }};
    t["local.patience"] = {
        [](ParsedConfig& c, const std::string& k, const std::string& v) {
          c.local.early_stopping.patience = parse_int(k, v);
        },
        [](const ParsedConfig& c) {
          return std::to_string(c.local.early_stopping.patience);
        }};

    t["privacy.clip_norm"] = {
        [](ParsedConfig& c, const std::string& k, const std::string& v) {
          c.privacy.clip_norm = parse_double(k, v);
        },
        [](const ParsedConfig& c) { return fmt_double(c.privacy.clip_norm); }};
    t["privacy.noise_multiplier"] = {
        [](ParsedConfig& c, const std::string& k, const std::string& v) {
          c.privacy.noise_multiplier = parse_double(k, v);
        },
        [](const ParsedConfig& c) { return fmt_double(c.privacy.noise_multiplier); }};
    t["privacy.delta"] = {
        [](ParsedConfig& c, const std::string& k, const std::string& v) {
          c.privacy.delta = parse_double(k, v);
        },
        [](const ParsedConfig& c) { return fmt_double(c.privacy.delta); }};
    t["privacy.epsilon_budget"] = {
        [](ParsedConfig& c, const std::string& k, const std::string& v) {
          c.privacy.epsilon_budget = parse_double(k, v);
        },
        [](const ParsedConfig& c) { return fmt_double(c.privacy.epsilon_budget); }};

    t["ensemble.weighting"] = {
        [](ParsedConfig& c, const std::string& k, const std::string& v) {
          if (v == "uniform")
            c.weighting.mode = ensemble::WeightingMode::uniform;
          else if (v == "distance_rank")
            c.weighting.mode = ensemble::WeightingMode::distance_rank;
          else
            bad(k, "expected uniform or distance_rank, got '" + v + "'");
        },
        [](const ParsedConfig& c) {
          return c.weighting.mode == ensemble::WeightingMode::uniform
                     ? "uniform"
                     : "distance_rank";
        }};
    t["ensemble.rank_to_weight"] = {
        [](ParsedConfig& c, const std::string& k, const std::string& v) {
          if (v == "inverse_rank")
            c.weighting.rank_to_weight = ensemble::RankToWeight::inverse_rank;
          else if (v == "linear_reversed")
            c.weighting.rank_to_weight = ensemble::RankToWeight::linear_reversed;
          else
            bad(k, "expected inverse_rank or linear_reversed, got '" + v + "'");
        },
        [](const ParsedConfig& c) {
          return c.weighting.rank_to_weight == ensemble::RankToWeight::inverse_rank
                     ? "inverse_rank"
                     : "linear_reversed";
        }};

    t["sweep.budgets"] = {
        [](ParsedConfig& c, const std::string& k, const std::string& v) {
          c.sweep_budgets.clear();
          for (const auto& p : split_list(v))
            c.sweep_budgets.push_back(parse_double(k, p));
          if (c.sweep_budgets.empty()) bad(k, "at least one budget required");
          for (std::size_t i = 0; i < c.sweep_budgets.size(); ++i) {
            if (!(c.sweep_budgets[i] > 0)) bad(k, "budgets must be positive");
            if (i > 0 && c.sweep_budgets[i] <= c.sweep_budgets[i - 1])
              bad(k, "budgets must be strictly increasing");
          }
        },
        [](const ParsedConfig& c) { return join(c.sweep_budgets, fmt_double); }};

    t["output.write_history"] = {
        [](ParsedConfig& c, const std::string& k, const std::string& v) {
          c.write_history = parse_bool(k, v);
        },
        [](const ParsedConfig& c) { return c.write_history ? "true" : "false"; }};
    t["output.write_checkpoints"] = {
        [](ParsedConfig& c, const std::string& k, const std::string& v) {
          c.write_checkpoints = parse_bool(k, v);
        },
        [](const ParsedConfig& c) { return c.write_checkpoints ? "true" : "false"; }};

    return t;
  }();
  return table;
}

void expand_shift(const std::string& key, const std::vector<double>& raw,
                  int feature_dim, Eigen::VectorXd* out) {
  if (raw.size() == 1) {
    *out = Eigen::VectorXd::Constant(feature_dim, raw[0]);
  } else if (raw.size() == static_cast<std::size_t>(feature_dim)) {
    *out = Eigen::Map<const Eigen::VectorXd>(raw.data(),
                                             static_cast<Eigen::Index>(raw.size()));
  } else {
    bad(key, "expected 1 or feature_dim (" + std::to_string(feature_dim) +
                 ") values, got " + std::to_string(raw.size()));
  }
}

}  // namespace

ParsedConfig default_config() {
  ParsedConfig cfg;
  finalize(cfg);
  return cfg;
}

void apply_override(ParsedConfig& cfg, const std::string& dotted_key,
                    const std::string& value) {
  const auto it = schema().find(dotted_key);
  if (it == schema().end()) bad(dotted_key, "unknown configuration key");
  it->second.set(cfg, dotted_key, trim(value));
}

ParsedConfig parse_config_text(const std::string& text) {
  ParsedConfig cfg;
  std::istringstream is(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s.front() == '[') {
      if (s.back() != ']')
        throw ConfigError("", "line " + std::to_string(line_no) +
                                  ": malformed section header '" + s + "'");
      section = trim(s.substr(1, s.size() - 2));
      if (section.empty())
        throw ConfigError("", "line " + std::to_string(line_no) + ": empty section");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError(section, "line " + std::to_string(line_no) +
                                     ": expected key = value, got '" + s + "'");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (key.empty())
      throw ConfigError(section, "line " + std::to_string(line_no) + ": empty key");
    if (section.empty())
      throw ConfigError(key, "key appears before any [section]");
    apply_override(cfg, section + "." + key, value);
  }
  finalize(cfg);
  return cfg;
}

ParsedConfig parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config: " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_config_text(buf.str());
}

void finalize(ParsedConfig& cfg) {
  expand_shift("synthetic.scale", cfg.scale_raw, cfg.generator.feature_dim,
               &cfg.generator.shift.scale);
  expand_shift("synthetic.offset", cfg.offset_raw, cfg.generator.feature_dim,
               &cfg.generator.shift.offset);

  // An unset schema defaults to the column naming the generator exports,
  // so generated files round trip without spelling the columns out.
  if (cfg.csv_schema.feature_columns.empty() &&
      cfg.csv_schema.target_column.empty())
    cfg.csv_schema = data::synthetic_schema(cfg.generator.feature_dim);

  try {
    if (cfg.source == ParsedConfig::Source::synthetic) cfg.generator.validate();
    cfg.federation.validate();
    cfg.local.validate();
    cfg.privacy.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("", e.what());
  }
  if (cfg.source == ParsedConfig::Source::csv && cfg.csv_path.empty())
    bad("data.csv_path", "required when data.source = csv");
  if (cfg.seeds.empty()) bad("experiment.seeds", "at least one seed required");
  if (cfg.test_years.empty())
    bad("experiment.test_years", "at least one test year required");
  for (int w : cfg.hidden)
    if (w < 1) bad("model.hidden", "layer widths must be >= 1");

  const bool wants_ldp =
      std::find(cfg.regimes.begin(), cfg.regimes.end(), "federated_ldp") !=
          cfg.regimes.end() ||
      std::find(cfg.regimes.begin(), cfg.regimes.end(), "model_sharing_ldp") !=
          cfg.regimes.end();
  if (wants_ldp) cfg.privacy.validate();
}

std::string canonical_dump(const ParsedConfig& cfg) {
  std::string out;
  for (const auto& [key, spec] : schema()) {
    out += key;
    out += '=';
    out += spec.get(cfg);
    out += '\n';
  }
  return out;
}

std::string config_hash_hex(const ParsedConfig& cfg) {
  const std::uint64_t h = rng::fnv1a(canonical_dump(cfg));
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace agrifed::config
