#pragma once

// Independent reference implementations and fixtures for the tests. None of
// the oracles call into the library code they are checked against.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "idslab/model.hpp"
#include "idslab/stream.hpp"

namespace idslab::testing {

inline Vector random_vector(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Vector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = g(rng);
  return v;
}

inline Matrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = g(rng);
  return m;
}

inline std::size_t uniform_int(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// Textbook double loop.
inline std::vector<double> naive_matvec(const Matrix& w, const Vector& x) {
  std::vector<double> out(static_cast<std::size_t>(w.rows()), 0.0);
  for (Eigen::Index r = 0; r < w.rows(); ++r)
    for (Eigen::Index c = 0; c < w.cols(); ++c) out[static_cast<std::size_t>(r)] += w(r, c) * x[c];
  return out;
}

inline std::vector<double> naive_softmax(const std::vector<double>& z) {
  double mx = *std::max_element(z.begin(), z.end());
  std::vector<double> e(z.size());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) s += (e[i] = std::exp(z[i] - mx));
  for (double& v : e) v /= s;
  return e;
}

// Ranks by counting: rank(x) = #{y < x} + (#{y == x} + 1) / 2.
inline std::vector<double> counting_ranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (double y : v) {
      if (y < v[i]) less += 1;
      if (y == v[i]) equal += 1;
    }
    r[i] = less + (equal + 1.0) / 2.0;
  }
  return r;
}

// Spearman as the Pearson correlation of counting ranks, written out longhand.
inline double rank_formula_spearman(const std::vector<double>& a, const std::vector<double>& b) {
  auto ra = counting_ranks(a), rb = counting_ranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += ra[i] / n, mb += rb[i] / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

// ||(p - y) phi^T||_F from the explicit outer product.
inline double outer_product_frobenius(const Vector& probs, ClassIndex y, const Vector& phi) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    const double e = probs[i] - (static_cast<ClassIndex>(i) == y ? 1.0 : 0.0);
    for (Eigen::Index j = 0; j < phi.size(); ++j) s += (e * phi[j]) * (e * phi[j]);
  }
  return std::sqrt(s);
}

// Small dataset with random features, labels cycling through the classes.
inline Dataset random_dataset(std::mt19937_64& rng, std::size_t n, std::size_t classes, std::size_t dim,
                              ExampleId first_id = 0) {
  Dataset d;
  d.num_classes = classes;
  d.feature_dim = dim;
  for (std::size_t i = 0; i < n; ++i) {
    Example e;
    e.id = first_id + i;
    e.label = static_cast<ClassIndex>(i % classes);
    e.features = random_vector(rng, dim);
    d.examples.push_back(std::move(e));
  }
  return d;
}

// Fresh scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("idslab_" + tag + "_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::FILE* f = std::fopen(p.string().c_str(), "rb");
  if (!f) return {};
  std::string s;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) s.append(buf, n);
  std::fclose(f);
  return s;
}

}  // namespace idslab::testing
