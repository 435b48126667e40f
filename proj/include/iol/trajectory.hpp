#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "iol/errors.hpp"
#include "iol/io_util.hpp"
#include "iol/rng.hpp"

namespace iol {

struct StepRecord {
  std::vector<double> x;  // context features
  int a = 0;              // binary action
  double y = 0.0;         // outcome
};

struct TrajectoryRecord {
  std::string id;
  std::vector<StepRecord> steps;  // temporal order

  int context_dim() const { return steps.empty() ? 0 : static_cast<int>(steps.front().x.size()); }
  int length() const { return static_cast<int>(steps.size()); }
};

struct StandardizationParams {
  std::vector<double> x_mean, x_std;
  double y_mean = 0.0, y_std = 1.0;
  bool y_binary = false;  // binary outcomes are left untouched
};

struct DatasetSplit {
  std::vector<TrajectoryRecord> train, validation, test;
  StandardizationParams standardization;
};

namespace detail {

inline void validate_record(const TrajectoryRecord& rec, int expected_dim) {
  if (rec.steps.empty())
    throw ValidationError("trajectory '" + rec.id + "' has no steps");
  const int d = rec.context_dim();
  if (expected_dim >= 0 && d != expected_dim)
    throw ValidationError("trajectory '" + rec.id + "' has context dim " + std::to_string(d) +
                          ", expected " + std::to_string(expected_dim));
  for (std::size_t t = 0; t < rec.steps.size(); ++t) {
    const StepRecord& s = rec.steps[t];
    if (static_cast<int>(s.x.size()) != d)
      throw ValidationError("trajectory '" + rec.id + "' step " + std::to_string(t) +
                            " has inconsistent context dim");
    for (double v : s.x)
      if (!std::isfinite(v))
        throw ValidationError("trajectory '" + rec.id + "' step " + std::to_string(t) +
                              " has non-finite context value");
    if (s.a != 0 && s.a != 1)
      throw ValidationError("trajectory '" + rec.id + "' step " + std::to_string(t) +
                            " has action " + std::to_string(s.a) + " outside {0,1}");
    if (!std::isfinite(s.y))
      throw ValidationError("trajectory '" + rec.id + "' step " + std::to_string(t) +
                            " has non-finite outcome");
  }
}

inline void validate_dataset(const std::vector<TrajectoryRecord>& recs) {
  int d = -1;
  for (const auto& rec : recs) {
    validate_record(rec, d);
    d = rec.context_dim();
  }
}

}  // namespace detail

// Canonical one-line serialization: fixed key order, floats at 17 significant
// digits, newline-terminated.
inline std::string trajectory_to_json_line(const TrajectoryRecord& rec) {
  std::string out = "{\"id\": \"" + json_escape(rec.id) + "\", \"steps\": [";
  for (std::size_t t = 0; t < rec.steps.size(); ++t) {
    const StepRecord& s = rec.steps[t];
    if (t) out += ", ";
    out += "{\"x\": [";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (i) out += ", ";
      out += format_double(s.x[i]);
    }
    out += "], \"a\": ";
    out += std::to_string(s.a);
    out += ", \"y\": ";
    out += format_double(s.y);
    out += "}";
  }
  out += "]}";
  return out;
}

inline void save_jsonl(const std::vector<TrajectoryRecord>& records, const std::string& path) {
  detail::validate_dataset(records);
  std::string out;
  for (const auto& rec : records) {
    out += trajectory_to_json_line(rec);
    out += '\n';
  }
  write_text_file(path, out);
}

inline std::vector<TrajectoryRecord> load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trajectory file: " + path);
  std::vector<TrajectoryRecord> records;
  std::string line;
  std::size_t lineno = 0;
  int d = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("parse error at " + path + ":" + std::to_string(lineno) + ": " +
                            e.what());
    }
    TrajectoryRecord rec;
    try {
      rec.id = j.at("id").get<std::string>();
      for (const auto& js : j.at("steps")) {
        StepRecord s;
        s.x = js.at("x").get<std::vector<double>>();
        s.a = js.at("a").get<int>();
        s.y = js.at("y").get<double>();
        rec.steps.push_back(std::move(s));
      }
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("schema error at " + path + ":" + std::to_string(lineno) + ": " +
                            e.what());
    }
    detail::validate_record(rec, d);
    d = rec.context_dim();
    records.push_back(std::move(rec));
  }
  return records;
}

// CSV of the same schema, one row per step: id,t,x_0..x_{d-1},a,y.
inline void save_csv(const std::vector<TrajectoryRecord>& records, const std::string& path) {
  detail::validate_dataset(records);
  const int d = records.empty() ? 0 : records.front().context_dim();
  std::string out = "id,t";
  for (int i = 0; i < d; ++i) out += ",x_" + std::to_string(i);
  out += ",a,y\n";
  for (const auto& rec : records) {
    for (std::size_t t = 0; t < rec.steps.size(); ++t) {
      const StepRecord& s = rec.steps[t];
      out += rec.id + "," + std::to_string(t);
      for (double v : s.x) out += "," + format_double(v);
      out += "," + std::to_string(s.a) + "," + format_double(s.y) + "\n";
    }
  }
  write_text_file(path, out);
}

inline std::vector<TrajectoryRecord> load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trajectory file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty csv file: " + path);
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 4 || header[0] != "id" || header[1] != "t" || header.back() != "y" ||
      header[header.size() - 2] != "a")
    throw ValidationError("csv header must be id,t,x_0..x_{d-1},a,y: " + path);
  const int d = static_cast<int>(header.size()) - 4;

  std::vector<TrajectoryRecord> records;
  std::size_t lineno = 1;
  // rows are expected grouped by id and ordered by t within each group
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (static_cast<int>(cells.size()) != d + 4)
      throw ValidationError("csv row at " + path + ":" + std::to_string(lineno) +
                            " has wrong column count");
    StepRecord s;
    try {
      for (int i = 0; i < d; ++i) s.x.push_back(std::stod(cells[2 + i]));
      s.a = std::stoi(cells[2 + d]);
      s.y = std::stod(cells[3 + d]);
    } catch (const std::exception&) {
      throw ValidationError("csv parse error at " + path + ":" + std::to_string(lineno));
    }
    if (records.empty() || records.back().id != cells[0]) {
      records.push_back(TrajectoryRecord{cells[0], {}});
    }
    records.back().steps.push_back(std::move(s));
  }
  detail::validate_dataset(records);
  return records;
}

// Fits shift/scale on `fit_on` and applies it to `records` in place. Features
// with zero variance pass through with std recorded as 1. Binary outcomes
// (value set within {0,1}) are left untouched.
inline StandardizationParams standardize(std::vector<TrajectoryRecord>& records,
                                         const std::vector<TrajectoryRecord>& fit_on) {
  if (fit_on.empty()) throw ValidationError("standardize: fit_on is empty");
  const int d = fit_on.front().context_dim();

  StandardizationParams p;
  p.x_mean.assign(d, 0.0);
  p.x_std.assign(d, 0.0);
  std::size_t n = 0;
  bool binary = true;
  double y_sum = 0.0;
  for (const auto& rec : fit_on)
    for (const auto& s : rec.steps) {
      for (int i = 0; i < d; ++i) p.x_mean[i] += s.x[i];
      y_sum += s.y;
      if (s.y != 0.0 && s.y != 1.0) binary = false;
      ++n;
    }
  for (int i = 0; i < d; ++i) p.x_mean[i] /= static_cast<double>(n);
  const double y_mean = y_sum / static_cast<double>(n);

  double y_var = 0.0;
  for (const auto& rec : fit_on)
    for (const auto& s : rec.steps) {
      for (int i = 0; i < d; ++i) {
        const double dlt = s.x[i] - p.x_mean[i];
        p.x_std[i] += dlt * dlt;
      }
      y_var += (s.y - y_mean) * (s.y - y_mean);
    }
  for (int i = 0; i < d; ++i) {
    p.x_std[i] = std::sqrt(p.x_std[i] / static_cast<double>(n));
    if (p.x_std[i] == 0.0) {  // zero-variance features pass through untouched
      p.x_std[i] = 1.0;
      p.x_mean[i] = 0.0;
    }
  }
  y_var = std::sqrt(y_var / static_cast<double>(n));

  p.y_binary = binary;
  if (binary || y_var == 0.0) {
    p.y_mean = 0.0;
    p.y_std = 1.0;
  } else {
    p.y_mean = y_mean;
    p.y_std = y_var;
  }

  for (auto& rec : records)
    for (auto& s : rec.steps) {
      for (int i = 0; i < d; ++i) s.x[i] = (s.x[i] - p.x_mean[i]) / p.x_std[i];
      s.y = (s.y - p.y_mean) / p.y_std;
    }
  return p;
}

inline void apply_standardization(std::vector<TrajectoryRecord>& records,
                                  const StandardizationParams& p) {
  for (auto& rec : records)
    for (auto& s : rec.steps) {
      for (std::size_t i = 0; i < s.x.size(); ++i) s.x[i] = (s.x[i] - p.x_mean[i]) / p.x_std[i];
      s.y = (s.y - p.y_mean) / p.y_std;
    }
}

inline void unstandardize(std::vector<TrajectoryRecord>& records, const StandardizationParams& p) {
  for (auto& rec : records)
    for (auto& s : rec.steps) {
      for (std::size_t i = 0; i < s.x.size(); ++i) s.x[i] = s.x[i] * p.x_std[i] + p.x_mean[i];
      s.y = s.y * p.y_std + p.y_mean;
    }
}

// Deterministic trajectory-level split. Sizes use largest-remainder rounding
// so each split lands within one of fraction * N.
inline DatasetSplit split(std::vector<TrajectoryRecord> records, double train_frac,
                          double val_frac, double test_frac, std::uint64_t seed) {
  if (train_frac <= 0 || val_frac <= 0 || test_frac <= 0)
    throw ValidationError("split fractions must be positive");
  if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
    throw ValidationError("split fractions must sum to 1");
  detail::validate_dataset(records);

  const std::size_t n = records.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(seed, 0x5917));
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.below(i);
    std::swap(order[i - 1], order[j]);
  }

  const double fracs[3] = {train_frac, val_frac, test_frac};
  std::size_t sizes[3];
  double rema[3];
  std::size_t assigned = 0;
  for (int k = 0; k < 3; ++k) {
    const double exact = fracs[k] * static_cast<double>(n);
    sizes[k] = static_cast<std::size_t>(std::floor(exact));
    rema[k] = exact - std::floor(exact);
    assigned += sizes[k];
  }
  while (assigned < n) {
    const int k = static_cast<int>(std::max_element(rema, rema + 3) - rema);
    ++sizes[k];
    rema[k] = -1.0;
    ++assigned;
  }

  DatasetSplit out;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < sizes[0]; ++i) out.train.push_back(records[order[pos++]]);
  for (std::size_t i = 0; i < sizes[1]; ++i) out.validation.push_back(records[order[pos++]]);
  for (std::size_t i = 0; i < sizes[2]; ++i) out.test.push_back(records[order[pos++]]);
  return out;
}

// Convenience: split then standardize on the training split.
inline DatasetSplit split_and_standardize(std::vector<TrajectoryRecord> records, double train_frac,
                                          double val_frac, double test_frac, std::uint64_t seed) {
  DatasetSplit s = split(std::move(records), train_frac, val_frac, test_frac, seed);
  std::vector<TrajectoryRecord> fit = s.train;
  StandardizationParams p;
  {
    std::vector<TrajectoryRecord> all;
    all.reserve(s.train.size() + s.validation.size() + s.test.size());
    for (auto* part : {&s.train, &s.validation, &s.test})
      for (auto& r : *part) all.push_back(std::move(r));
    p = standardize(all, fit);
    std::size_t pos = 0;
    for (auto* part : {&s.train, &s.validation, &s.test})
      for (auto& r : *part) r = std::move(all[pos++]);
  }
  s.standardization = p;
  return s;
}

}  // namespace iol
