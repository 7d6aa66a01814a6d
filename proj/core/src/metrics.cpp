// Copyright (c) 2026, The DDMM Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddmm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "ddmm/nn_ops.hpp"
#include "ddmm/parallel.hpp"
#include "ddmm/rng.hpp"

namespace ddmm::metrics {

namespace {

struct WindowStats {
  double mu_a, mu_b, var_a, var_b, cov;
};

// Calls fn(stats) for every valid window position of every channel.
template <typename T, typename Fn>
void for_each_window(const BasicGrid<T>& a, const BasicGrid<T>& b, Fn&& fn) {
  const int wh = std::min(kWindow, a.height());
  const int ww = std::min(kWindow, a.width());
  const double n = static_cast<double>(wh) * ww;
  for (int c = 0; c < a.channels(); ++c) {
    for (int y0 = 0; y0 + wh <= a.height(); ++y0) {
      for (int x0 = 0; x0 + ww <= a.width(); ++x0) {
        double sa = 0, sb = 0;
        for (int y = y0; y < y0 + wh; ++y) {
          for (int x = x0; x < x0 + ww; ++x) {
            sa += (static_cast<double>(a(c, y, x)) + 1.0) * 0.5;
            sb += (static_cast<double>(b(c, y, x)) + 1.0) * 0.5;
          }
        }
        WindowStats s{sa / n, sb / n, 0, 0, 0};
        for (int y = y0; y < y0 + wh; ++y) {
          for (int x = x0; x < x0 + ww; ++x) {
            const double da = (static_cast<double>(a(c, y, x)) + 1.0) * 0.5 - s.mu_a;
            const double db = (static_cast<double>(b(c, y, x)) + 1.0) * 0.5 - s.mu_b;
            s.var_a += da * da;
            s.var_b += db * db;
            s.cov += da * db;
          }
        }
        s.var_a /= n;
        s.var_b /= n;
        s.cov /= n;
        fn(s);
      }
    }
  }
}

template <typename T>
void require_binary(const BasicGrid<T>& g, const char* what) {
  for (T v : g.values()) {
    if (v != T(0) && v != T(1)) {
      throw ValidationError(std::string(what) + ": mask values must be 0 or 1");
    }
  }
}

// Square root of a symmetric PSD matrix; eigenvalues below -1e-8 are rejected.
Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  require(es.info() == Eigen::Success, std::string(what) + ": eigendecomposition failed");
  Eigen::VectorXd ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < -1e-8) {
      throw NumericError(std::string(what) + ": matrix has negative eigenvalue " + std::to_string(ev(i)));
    }
    ev(i) = std::sqrt(std::max(0.0, ev(i)));
  }
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

void check_features(const FeatureMatrix& f, const char* what) {
  require(f.rows() >= 2, std::string(what) + ": need at least 2 samples");
  require(f.allFinite(), std::string(what) + ": non-finite features");
}

double poly_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double d) {
  const double k = x.dot(y) / d + 1.0;
  return k * k * k;
}

}  // namespace

template <typename T>
double ssim(const BasicGrid<T>& a, const BasicGrid<T>& b) {
  require_same_shape(a, b, "ssim");
  double sum = 0.0;
  std::size_t count = 0;
  for_each_window(a, b, [&](const WindowStats& s) {
    sum += ((2 * s.mu_a * s.mu_b + kSsimC1) * (2 * s.cov + kSsimC2)) /
           ((s.mu_a * s.mu_a + s.mu_b * s.mu_b + kSsimC1) * (s.var_a + s.var_b + kSsimC2));
    ++count;
  });
  return sum / static_cast<double>(count);
}

template <typename T>
double uqi(const BasicGrid<T>& a, const BasicGrid<T>& b) {
  require_same_shape(a, b, "uqi");
  double sum = 0.0;
  std::size_t count = 0;
  for_each_window(a, b, [&](const WindowStats& s) {
    const double den = (s.mu_a * s.mu_a + s.mu_b * s.mu_b) * (s.var_a + s.var_b);
    if (den == 0.0) return;
    sum += 4 * s.cov * s.mu_a * s.mu_b / den;
    ++count;
  });
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

std::vector<double> laplacian(const GridD& g) {
  require(g.height() >= 3 && g.width() >= 3, "laplacian: image must be at least 3x3");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(g.channels()) * (g.height() - 2) * (g.width() - 2));
  for (int c = 0; c < g.channels(); ++c) {
    for (int y = 1; y + 1 < g.height(); ++y) {
      for (int x = 1; x + 1 < g.width(); ++x) {
        out.push_back(g(c, y - 1, x) + g(c, y + 1, x) + g(c, y, x - 1) + g(c, y, x + 1) -
                      4.0 * g(c, y, x));
      }
    }
  }
  return out;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && !x.empty(), "pearson: length mismatch");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

template <typename T>
double scc(const BasicGrid<T>& a, const BasicGrid<T>& b) {
  require_same_shape(a, b, "scc");
  auto unit = [](const BasicGrid<T>& g) {
    GridD d = GridD::cast(g);
    for (auto& v : d.values()) v = (v + 1.0) * 0.5;
    return d;
  };
  return pearson(laplacian(unit(a)), laplacian(unit(b)));
}

FeatureExtractor::FeatureExtractor(std::uint64_t seed) : seed_(seed) {
  RngStream rng(seed, "feature-extractor");
  const int widths[3] = {16, 32, kDim};
  int cin = 1;
  for (int cout : widths) {
    Stage s{cin, cout, std::vector<float>(static_cast<std::size_t>(cout) * cin * 9),
            std::vector<float>(static_cast<std::size_t>(cout))};
    const double scale = std::sqrt(2.0 / (9.0 * cin));
    for (auto& w : s.weight) w = static_cast<float>(rng.normal() * scale);
    for (auto& b : s.bias) b = static_cast<float>(rng.normal() * 0.1);
    stages_.push_back(std::move(s));
    cin = cout;
  }
}

Eigen::VectorXd FeatureExtractor::features(const Grid& image) const {
  require(image.channels() == 1, "features: single-channel image required");
  require(image.height() % 4 == 0 && image.width() % 4 == 0,
          "features: image size must be divisible by 4");
  nn::Shape shape{1, image.height(), image.width()};
  std::vector<float> x(image.values().begin(), image.values().end());
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    const Stage& st = stages_[i];
    const nn::Shape out{st.cout, shape.h, shape.w};
    std::vector<float> y(out.size());
    nn::conv3x3_forward<float>(x, shape, st.weight, st.bias, st.cout, y);
    for (auto& v : y) v = std::max(v, 0.f);
    shape = out;
    if (i + 1 < stages_.size()) {
      const nn::Shape pooled{shape.c, shape.h / 2, shape.w / 2};
      std::vector<float> p(pooled.size());
      nn::avgpool2_forward<float>(y, shape, p);
      x = std::move(p);
      shape = pooled;
    } else {
      x = std::move(y);
    }
  }
  Eigen::VectorXd f(kDim);
  const std::size_t plane = shape.plane();
  for (int c = 0; c < kDim; ++c) {
    double s = 0.0;
    for (std::size_t i = 0; i < plane; ++i) s += x[c * plane + i];
    f(c) = s / static_cast<double>(plane);
  }
  return f;
}

FeatureMatrix FeatureExtractor::features(const std::vector<Grid>& images) const {
  FeatureMatrix m(static_cast<Eigen::Index>(images.size()), kDim);
  parallel_for(images.size(), [&](std::size_t i) {
    m.row(static_cast<Eigen::Index>(i)) = features(images[i]).transpose();
  });
  return m;
}

double frechet_distance(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& s1,
                        const Eigen::VectorXd& mu2, const Eigen::MatrixXd& s2) {
  const Eigen::MatrixXd r1 = sqrt_psd(s1, "fid");
  const Eigen::MatrixXd covmean = sqrt_psd(r1 * s2 * r1, "fid");
  const double d = (mu1 - mu2).squaredNorm() + s1.trace() + s2.trace() - 2.0 * covmean.trace();
  return std::max(0.0, d);
}

double fid(const FeatureMatrix& real, const FeatureMatrix& fake) {
  check_features(real, "fid");
  check_features(fake, "fid");
  require(real.cols() == fake.cols(), "fid: feature dimension mismatch");
  auto stats = [](const FeatureMatrix& f, Eigen::VectorXd& mu, Eigen::MatrixXd& cov) {
    mu = f.colwise().mean().transpose();
    const Eigen::MatrixXd c = f.rowwise() - mu.transpose();
    cov = (c.transpose() * c) / static_cast<double>(f.rows() - 1);
  };
  Eigen::VectorXd mr, mf;
  Eigen::MatrixXd sr, sf;
  stats(real, mr, sr);
  stats(fake, mf, sf);
  return frechet_distance(mr, sr, mf, sf);
}

double mmd2_unbiased(const FeatureMatrix& x, const FeatureMatrix& y) {
  const double d = static_cast<double>(x.cols());
  const Eigen::Index m = x.rows(), n = y.rows();
  double kxx = 0, kyy = 0, kxy = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      if (i != j) kxx += poly_kernel(x.row(i), x.row(j), d);
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j) kyy += poly_kernel(y.row(i), y.row(j), d);
    }
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) kxy += poly_kernel(x.row(i), y.row(j), d);
  }
  return kxx / static_cast<double>(m * (m - 1)) + kyy / static_cast<double>(n * (n - 1)) -
         2.0 * kxy / static_cast<double>(m * n);
}

double kid(const FeatureMatrix& real, const FeatureMatrix& fake, std::uint64_t seed) {
  check_features(real, "kid");
  check_features(fake, "kid");
  require(real.cols() == fake.cols(), "kid: feature dimension mismatch");
  constexpr Eigen::Index kSubset = 100;
  const Eigen::Index n = std::min(real.rows(), fake.rows());
  if (n < 2 * kSubset) return mmd2_unbiased(real, fake);
  const Eigen::Index n_subsets = std::min<Eigen::Index>(n / kSubset, 10);
  // Each side's subset depends only on its own size and k, so kid is symmetric.
  auto subset = [&](const FeatureMatrix& f, Eigen::Index k) {
    const auto perm = RngStream(seed, "kid-subset", static_cast<std::uint64_t>(k))
                          .permutation(static_cast<std::size_t>(f.rows()));
    FeatureMatrix s(kSubset, f.cols());
    for (Eigen::Index i = 0; i < kSubset; ++i) s.row(i) = f.row(static_cast<Eigen::Index>(perm[i]));
    return s;
  };
  double sum = 0.0;
  for (Eigen::Index k = 0; k < n_subsets; ++k) sum += mmd2_unbiased(subset(real, k), subset(fake, k));
  return sum / static_cast<double>(n_subsets);
}

template <typename T>
double dice(const BasicGrid<T>& a, const BasicGrid<T>& b) {
  require_same_shape(a, b, "dice");
  require_binary(a, "dice");
  require_binary(b, "dice");
  std::size_t na = 0, nb = 0, both = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool pa = a[i] == T(1), pb = b[i] == T(1);
    na += pa;
    nb += pb;
    both += pa && pb;
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

template <typename T>
double rand_score(const BasicGrid<T>& a, const BasicGrid<T>& b, bool adjusted) {
  require_same_shape(a, b, "rand_score");
  require_binary(a, "rand_score");
  require_binary(b, "rand_score");
  double n_ij[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t i = 0; i < a.size(); ++i) n_ij[a[i] == T(1)][b[i] == T(1)] += 1.0;
  auto pairs = [](double k) { return k * (k - 1.0) / 2.0; };
  const double n = static_cast<double>(a.size());
  const double total = pairs(n);
  double sum_ij = 0, sum_a = 0, sum_b = 0;
  for (int i = 0; i < 2; ++i) {
    sum_a += pairs(n_ij[i][0] + n_ij[i][1]);
    sum_b += pairs(n_ij[0][i] + n_ij[1][i]);
    for (int j = 0; j < 2; ++j) sum_ij += pairs(n_ij[i][j]);
  }
  if (total == 0.0) return 1.0;
  if (!adjusted) return (total + 2.0 * sum_ij - sum_a - sum_b) / total;
  const double expected = sum_a * sum_b / total;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;
  return (sum_ij - expected) / (max_index - expected);
}

QualityReport evaluate_quality(const std::vector<Grid>& real, const std::vector<Grid>& fake,
                               const MetricSettings& settings) {
  require(real.size() >= 2 && fake.size() >= 2, "evaluate_quality: need at least 2 images per side");
  require(settings.max_pairs >= 1, "evaluate_quality: max_pairs must be >= 1");
  for (const auto& g : fake) require_same_shape(g, real.front(), "evaluate_quality");
  for (const auto& g : real) require_same_shape(g, real.front(), "evaluate_quality");
  const FeatureExtractor extractor(settings.extractor_seed);
  const FeatureMatrix fr = extractor.features(real);
  const FeatureMatrix ff = extractor.features(fake);
  QualityReport r;
  r.n_real = real.size();
  r.n_fake = fake.size();
  r.fid = fid(fr, ff);
  r.kid = kid(fr, ff, settings.kid_seed);

  RngStream rng(settings.pairing_seed, "pairing");
  const auto pr = rng.permutation(real.size());
  const auto pf = rng.permutation(fake.size());
  r.n_pairs = std::min({real.size(), fake.size(), static_cast<std::size_t>(settings.max_pairs)});
  std::vector<double> s(r.n_pairs), u(r.n_pairs), c(r.n_pairs);
  parallel_for(r.n_pairs, [&](std::size_t k) {
    const Grid& a = real[pr[k]];
    const Grid& b = fake[pf[k]];
    s[k] = ssim(a, b);
    u[k] = uqi(a, b);
    c[k] = scc(a, b);
  });
  for (std::size_t k = 0; k < r.n_pairs; ++k) {
    r.ssim_mean += s[k];
    r.uqi_mean += u[k];
    r.scc_mean += c[k];
  }
  r.ssim_mean /= static_cast<double>(r.n_pairs);
  r.uqi_mean /= static_cast<double>(r.n_pairs);
  r.scc_mean /= static_cast<double>(r.n_pairs);
  return r;
}

void write_quality_csv(const std::string& path, const QualityReport& r, const MetricSettings& settings) {
  std::ofstream f(path);
  require(static_cast<bool>(f), "cannot write " + path);
  f << "# fid/kid use a seeded random feature extractor (seed " << settings.extractor_seed
    << "); values are only comparable within this tool\n";
  f << "extractor_seed,n_real,n_fake,n_pairs,fid,kid,ssim,uqi,scc\n";
  f << std::setprecision(10) << settings.extractor_seed << ',' << r.n_real << ',' << r.n_fake << ','
    << r.n_pairs << ',' << r.fid << ',' << r.kid << ',' << r.ssim_mean << ',' << r.uqi_mean << ','
    << r.scc_mean << '\n';
  require(static_cast<bool>(f), "write failed: " + path);
}

template double ssim(const Grid&, const Grid&);
template double ssim(const GridD&, const GridD&);
template double uqi(const Grid&, const Grid&);
template double uqi(const GridD&, const GridD&);
template double scc(const Grid&, const Grid&);
template double scc(const GridD&, const GridD&);
template double dice(const Grid&, const Grid&);
template double dice(const GridD&, const GridD&);
template double rand_score(const Grid&, const Grid&, bool);
template double rand_score(const GridD&, const GridD&, bool);

}  // namespace ddmm::metrics
