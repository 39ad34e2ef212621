#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "domdiv/common.hpp"

#include <nlohmann/json.hpp>

namespace domdiv {

using json = nlohmann::ordered_json;

// Class ids are strings in files and dense integer indices internally.
// The mapping travels with every model/report so results stay auditable.
class LabelMap {
 public:
  int intern(const std::string& name) {
    auto it = index_.find(name);
    if (it != index_.end()) return it->second;
    const int id = static_cast<int>(names_.size());
    names_.push_back(name);
    index_.emplace(name, id);
    return id;
  }

  int at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw DataError("unknown class id '" + name + "'");
    return it->second;
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const std::string& name(int id) const { return names_.at(static_cast<std::size_t>(id)); }
  int size() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> index_;
};

struct Dataset {
  Matrix features;                       // n_instances x n_dims
  std::vector<int> labels;               // dense class index per row
  std::vector<std::string> instance_ids;

  Eigen::Index n() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }

  Dataset rows(const std::vector<Eigen::Index>& idx) const {
    Dataset out;
    out.features.resize(static_cast<Eigen::Index>(idx.size()), features.cols());
    out.labels.reserve(idx.size());
    out.instance_ids.reserve(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      out.features.row(static_cast<Eigen::Index>(k)) = features.row(idx[k]);
      out.labels.push_back(labels[static_cast<std::size_t>(idx[k])]);
      out.instance_ids.push_back(instance_ids[static_cast<std::size_t>(idx[k])]);
    }
    return out;
  }
};

struct ClassSplit {
  std::vector<int> seen;    // C_s
  std::vector<int> unseen;  // C_t
  std::vector<Eigen::Index> train_idx;
  std::vector<Eigen::Index> test_idx;

  bool is_seen(int c) const { return std::find(seen.begin(), seen.end(), c) != seen.end(); }
  bool is_unseen(int c) const { return std::find(unseen.begin(), unseen.end(), c) != unseen.end(); }
};

// Per-class semantic attribute vectors.
class PrototypeTable {
 public:
  void add(int class_id, const Vector& v) {
    if (row_of_.count(class_id)) throw DataError("duplicate prototype for class index " + std::to_string(class_id));
    if (!rows_.empty() && v.size() != rows_.front().size())
      throw DataError("prototype width mismatch for class index " + std::to_string(class_id));
    for (Eigen::Index j = 0; j < v.size(); ++j) require_finite(v[j], "prototype");
    row_of_[class_id] = rows_.size();
    rows_.push_back(v);
    class_ids_.push_back(class_id);
  }

  bool has(int class_id) const { return row_of_.count(class_id) != 0; }

  const Vector& vec(int class_id) const {
    auto it = row_of_.find(class_id);
    if (it == row_of_.end()) throw DataError("missing prototype for class index " + std::to_string(class_id));
    return rows_[it->second];
  }

  Eigen::Index width() const { return rows_.empty() ? 0 : rows_.front().size(); }
  std::size_t size() const { return rows_.size(); }
  const std::vector<int>& class_ids() const { return class_ids_; }

  void l2_normalize() {
    for (auto& r : rows_) {
      const double nrm = r.norm();
      if (nrm > 0) r /= nrm;
    }
  }

 private:
  std::vector<Vector> rows_;
  std::vector<int> class_ids_;
  std::map<int, std::size_t> row_of_;
};

struct SyntheticConfig {
  int n_seen = 4;
  int n_unseen = 3;
  int dim_feature = 12;
  int dim_attr = 6;
  int per_class_train = 60;
  int per_class_test = 30;
  double overlap = 0.5;  // 0 = far apart clusters, larger = more cluster overlap
  std::uint64_t rng_seed = 1;

  void validate() const {
    if (n_seen < 1 || n_unseen < 1) throw ConfigError("synthetic: class counts must be >= 1");
    if (dim_feature < 1 || dim_attr < 1) throw ConfigError("synthetic: dimensionalities must be >= 1");
    if (per_class_train < 1 || per_class_test < 1) throw ConfigError("synthetic: per-class counts must be >= 1");
    if (!(overlap >= 0.0)) throw ConfigError("synthetic: overlap must be >= 0");
  }
};

inline void to_json(json& j, const SyntheticConfig& c) {
  j = json{{"n_seen", c.n_seen},
           {"n_unseen", c.n_unseen},
           {"dim_feature", c.dim_feature},
           {"dim_attr", c.dim_attr},
           {"per_class_train", c.per_class_train},
           {"per_class_test", c.per_class_test},
           {"overlap", c.overlap},
           {"rng_seed", c.rng_seed}};
}

inline void from_json(const json& j, SyntheticConfig& c) {
  c.n_seen = j.value("n_seen", c.n_seen);
  c.n_unseen = j.value("n_unseen", c.n_unseen);
  c.dim_feature = j.value("dim_feature", c.dim_feature);
  c.dim_attr = j.value("dim_attr", c.dim_attr);
  c.per_class_train = j.value("per_class_train", c.per_class_train);
  c.per_class_test = j.value("per_class_test", c.per_class_test);
  c.overlap = j.value("overlap", c.overlap);
  c.rng_seed = j.value("rng_seed", c.rng_seed);
}

struct LoadedData {
  Dataset dataset;
  ClassSplit split;
  PrototypeTable prototypes;  // may be empty if not loaded
  LabelMap labels;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing garbage");
    return v;
  } catch (const std::exception&) {
    throw DataError(where + ": cannot parse number '" + s + "'");
  }
}

}  // namespace detail

// features CSV, no header: instance_id,label,v1,...,vd
inline void load_features_csv(const std::string& path, Dataset& ds, LabelMap& labels) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open features file: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  Eigen::Index width = -1;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    const std::string where = path + ":" + std::to_string(lineno);
    if (cells.size() < 3) throw DataError(where + ": expected instance_id,label,v1,...");
    const Eigen::Index d = static_cast<Eigen::Index>(cells.size()) - 2;
    if (width < 0) width = d;
    if (d != width)
      throw DataError(where + ": dimension mismatch, row " + std::to_string(ds.instance_ids.size()) +
                      " has width " + std::to_string(d) + ", expected " + std::to_string(width));
    ds.instance_ids.push_back(cells[0]);
    ds.labels.push_back(labels.intern(cells[1]));
    std::vector<double> vals(static_cast<std::size_t>(d));
    for (Eigen::Index j = 0; j < d; ++j) {
      vals[static_cast<std::size_t>(j)] = detail::parse_double(cells[static_cast<std::size_t>(j) + 2], where);
      require_finite(vals[static_cast<std::size_t>(j)], where);
    }
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw DataError(path + ": empty features file");
  ds.features.resize(static_cast<Eigen::Index>(rows.size()), width);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (Eigen::Index j = 0; j < width; ++j)
      ds.features(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
}

// split file: JSON with seen_classes, unseen_classes, train_ids, test_ids
inline ClassSplit load_split(const std::string& path, const Dataset& ds, LabelMap& labels) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open split file: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw DataError(path + ": parse error: " + e.what());
  }
  for (const char* key : {"seen_classes", "unseen_classes", "train_ids", "test_ids"})
    if (!j.contains(key)) throw DataError(path + ": missing key '" + key + "'");

  ClassSplit split;
  for (const auto& name : j["seen_classes"]) split.seen.push_back(labels.intern(name.get<std::string>()));
  for (const auto& name : j["unseen_classes"]) split.unseen.push_back(labels.intern(name.get<std::string>()));
  std::sort(split.seen.begin(), split.seen.end());
  std::sort(split.unseen.begin(), split.unseen.end());
  for (int c : split.seen)
    if (split.is_unseen(c)) throw DataError(path + ": class '" + labels.name(c) + "' listed as both seen and unseen");

  std::unordered_map<std::string, Eigen::Index> row_of;
  for (std::size_t i = 0; i < ds.instance_ids.size(); ++i)
    row_of[ds.instance_ids[i]] = static_cast<Eigen::Index>(i);
  auto lookup = [&](const json& arr, const char* what) {
    std::vector<Eigen::Index> out;
    for (const auto& id : arr) {
      auto it = row_of.find(id.get<std::string>());
      if (it == row_of.end())
        throw DataError(path + ": " + what + " references unknown instance '" + id.get<std::string>() + "'");
      out.push_back(it->second);
    }
    return out;
  };
  split.train_idx = lookup(j["train_ids"], "train_ids");
  split.test_idx = lookup(j["test_ids"], "test_ids");

  // Every label present in the data must be declared by the split.
  for (std::size_t i = 0; i < ds.labels.size(); ++i) {
    const int c = ds.labels[i];
    if (!split.is_seen(c) && !split.is_unseen(c))
      throw DataError(path + ": label '" + labels.name(c) + "' of instance '" + ds.instance_ids[i] +
                      "' is not in the split file");
  }
  for (Eigen::Index i : split.train_idx)
    if (!split.is_seen(ds.labels[static_cast<std::size_t>(i)]))
      throw DataError(path + ": train instance '" + ds.instance_ids[static_cast<std::size_t>(i)] +
                      "' has unseen label");
  return split;
}

// Optional binary matrix format: magic "DDIV", u32 rows, u32 cols, row-major f64, little endian.
inline void write_matrix_binary(const std::string& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for write: " + path);
  out.write("DDIV", 4);
  auto put_u32 = [&](std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
  };
  put_u32(static_cast<std::uint32_t>(m.rows()));
  put_u32(static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::uint64_t bits;
      const double v = m(i, j);
      std::memcpy(&bits, &v, 8);
      unsigned char b[8];
      for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(bits >> (8 * k));
      out.write(reinterpret_cast<const char*>(b), 8);
    }
}

inline Matrix read_matrix_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "DDIV") throw DataError(path + ": bad magic, expected DDIV");
  auto get_u32 = [&]() {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw DataError(path + ": truncated header");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  };
  const std::uint32_t rows = get_u32(), cols = get_u32();
  Matrix m(rows, cols);
  for (std::uint32_t i = 0; i < rows; ++i)
    for (std::uint32_t j = 0; j < cols; ++j) {
      unsigned char b[8];
      in.read(reinterpret_cast<char*>(b), 8);
      if (!in) throw DataError(path + ": truncated payload");
      std::uint64_t bits = 0;
      for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(b[k]) << (8 * k);
      double v;
      std::memcpy(&v, &bits, 8);
      m(i, j) = v;
    }
  return m;
}

// labels_path: empty or equal to features_path means labels are embedded in the
// features CSV. Otherwise features_path may be a DDIV binary matrix and
// labels_path a CSV of instance_id,label rows in matrix row order.
inline LoadedData load_dataset(const std::string& features_path, const std::string& labels_path,
                               const std::string& split_path) {
  LoadedData out;
  if (labels_path.empty() || labels_path == features_path) {
    load_features_csv(features_path, out.dataset, out.labels);
  } else {
    out.dataset.features = read_matrix_binary(features_path);
    std::ifstream in(labels_path);
    if (!in) throw DataError("cannot open labels file: " + labels_path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto cells = detail::split_csv_line(line);
      if (cells.size() != 2)
        throw DataError(labels_path + ":" + std::to_string(lineno) + ": expected instance_id,label");
      out.dataset.instance_ids.push_back(cells[0]);
      out.dataset.labels.push_back(out.labels.intern(cells[1]));
    }
    if (static_cast<Eigen::Index>(out.dataset.labels.size()) != out.dataset.features.rows())
      throw DataError(labels_path + ": row count does not match feature matrix");
    for (Eigen::Index i = 0; i < out.dataset.features.rows(); ++i)
      for (Eigen::Index j = 0; j < out.dataset.features.cols(); ++j)
        require_finite(out.dataset.features(i, j), labels_path);
  }
  out.split = load_split(split_path, out.dataset, out.labels);
  return out;
}

// prototypes CSV, no header: class_id,a1,...,am
inline PrototypeTable load_prototypes(const std::string& path, LabelMap& labels) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open prototypes file: " + path);
  PrototypeTable table;
  std::string line;
  std::size_t lineno = 0;
  Eigen::Index width = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    const std::string where = path + ":" + std::to_string(lineno);
    if (cells.size() < 2) throw DataError(where + ": expected class_id,a1,...");
    const Eigen::Index m = static_cast<Eigen::Index>(cells.size()) - 1;
    if (width < 0) width = m;
    if (m != width)
      throw DataError(where + ": width mismatch, got " + std::to_string(m) + " expected " + std::to_string(width));
    Vector v(m);
    for (Eigen::Index j = 0; j < m; ++j) v[j] = detail::parse_double(cells[static_cast<std::size_t>(j) + 1], where);
    const int cid = labels.intern(cells[0]);
    if (table.has(cid)) throw DataError(where + ": duplicate class id '" + cells[0] + "'");
    table.add(cid, v);
  }
  if (table.size() == 0) throw DataError(path + ": empty prototypes file");
  return table;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_features_csv(const std::string& path, const Dataset& ds, const LabelMap& labels) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for write: " + path);
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    out << ds.instance_ids[static_cast<std::size_t>(i)] << ',' << labels.name(ds.labels[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < ds.dim(); ++j) out << ',' << format_double(ds.features(i, j));
    out << '\n';
  }
}

inline void write_prototypes_csv(const std::string& path, const PrototypeTable& table, const LabelMap& labels) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for write: " + path);
  for (int cid : table.class_ids()) {
    out << labels.name(cid);
    const Vector& v = table.vec(cid);
    for (Eigen::Index j = 0; j < v.size(); ++j) out << ',' << format_double(v[j]);
    out << '\n';
  }
}

inline void write_split(const std::string& path, const Dataset& ds, const ClassSplit& split, const LabelMap& labels) {
  json j;
  j["seen_classes"] = json::array();
  for (int c : split.seen) j["seen_classes"].push_back(labels.name(c));
  j["unseen_classes"] = json::array();
  for (int c : split.unseen) j["unseen_classes"].push_back(labels.name(c));
  j["train_ids"] = json::array();
  for (Eigen::Index i : split.train_idx) j["train_ids"].push_back(ds.instance_ids[static_cast<std::size_t>(i)]);
  j["test_ids"] = json::array();
  for (Eigen::Index i : split.test_idx) j["test_ids"].push_back(ds.instance_ids[static_cast<std::size_t>(i)]);
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for write: " + path);
  out << j.dump(2) << '\n';
}

inline void write_dataset(const std::string& features_path, const std::string& split_path, const Dataset& ds,
                          const ClassSplit& split, const LabelMap& labels) {
  write_features_csv(features_path, ds, labels);
  write_split(split_path, ds, split, labels);
}

// Seeded Gaussian-cluster generator. One cluster per class (unit variance),
// centers scaled so the minimum pairwise center distance divided by the
// cluster radius sqrt(d) shrinks as `overlap` grows. Class attribute vectors
// are an affine projection of the cluster centers plus seeded noise, so the
// semantic space stays informative and zero-shot recognition is learnable.
inline LoadedData generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.rng_seed);

  const int n_classes = cfg.n_seen + cfg.n_unseen;
  const Eigen::Index d = cfg.dim_feature;
  const Eigen::Index m = cfg.dim_attr;

  // Random unit directions, then rescale so min pairwise distance hits the target.
  Matrix centers(n_classes, d);
  for (int c = 0; c < n_classes; ++c) {
    Vector v(d);
    for (Eigen::Index j = 0; j < d; ++j) v[j] = rng.normal();
    const double nrm = v.norm();
    centers.row(c) = (nrm > 0 ? v / nrm : v).transpose();
  }
  double min_dist = std::numeric_limits<double>::infinity();
  if (n_classes > 1) {
    for (int a = 0; a < n_classes; ++a)
      for (int b = a + 1; b < n_classes; ++b)
        min_dist = std::min(min_dist, (centers.row(a) - centers.row(b)).norm());
  } else {
    min_dist = 1.0;
  }
  if (min_dist <= 0) min_dist = 1e-9;
  const double sep_ratio = 10.0 / (1.0 + 6.0 * cfg.overlap);  // inter-center distance / cluster radius
  const double target = sep_ratio * std::sqrt(static_cast<double>(d));
  centers *= target / min_dist;

  // Attribute projection shared by all classes.
  Matrix proj(m, d);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < d; ++j) proj(i, j) = rng.normal() / std::sqrt(static_cast<double>(d));

  LoadedData out;
  for (int c = 0; c < cfg.n_seen; ++c) out.labels.intern("seen_" + std::to_string(c));
  for (int c = 0; c < cfg.n_unseen; ++c) out.labels.intern("unseen_" + std::to_string(c));

  const double attr_scale = 1.0 / std::sqrt(static_cast<double>(d));  // keeps attributes O(1)
  for (int c = 0; c < n_classes; ++c) {
    Vector y = proj * centers.row(c).transpose() * attr_scale;
    for (Eigen::Index j = 0; j < m; ++j) y[j] += 0.05 * rng.normal();
    out.prototypes.add(c, y);
  }

  const Eigen::Index n_total = static_cast<Eigen::Index>(cfg.n_seen) * (cfg.per_class_train + cfg.per_class_test) +
                               static_cast<Eigen::Index>(cfg.n_unseen) * cfg.per_class_test;
  out.dataset.features.resize(n_total, d);
  out.dataset.labels.reserve(static_cast<std::size_t>(n_total));
  out.dataset.instance_ids.reserve(static_cast<std::size_t>(n_total));

  Eigen::Index row = 0;
  auto emit = [&](int c, int count, std::vector<Eigen::Index>& idx_sink) {
    for (int k = 0; k < count; ++k) {
      for (Eigen::Index j = 0; j < d; ++j) out.dataset.features(row, j) = centers(c, j) + rng.normal();
      out.dataset.labels.push_back(c);
      char buf[16];
      std::snprintf(buf, sizeof(buf), "n%06ld", static_cast<long>(row));
      out.dataset.instance_ids.emplace_back(buf);
      idx_sink.push_back(row);
      ++row;
    }
  };
  for (int c = 0; c < cfg.n_seen; ++c) emit(c, cfg.per_class_train, out.split.train_idx);
  for (int c = 0; c < cfg.n_seen; ++c) emit(c, cfg.per_class_test, out.split.test_idx);
  for (int c = cfg.n_seen; c < n_classes; ++c) emit(c, cfg.per_class_test, out.split.test_idx);

  for (int c = 0; c < cfg.n_seen; ++c) out.split.seen.push_back(c);
  for (int c = cfg.n_seen; c < n_classes; ++c) out.split.unseen.push_back(c);
  return out;
}

}  // namespace domdiv
