#include "mbsr/interconnection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include "mbsr/parallel.hpp"

namespace mbsr {

std::optional<double> pcc(const Map2D& a, const Map2D& b) {
  if (!a.same_shape(b) || a.empty()) throw Error("pcc: inputs must be nonempty and of equal shape");
  const auto n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a.data()[i];
    mb += b.data()[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a.data()[i] - ma;
    const double db = b.data()[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return std::nullopt;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::vector<double> gaussian_window(std::size_t size, double sigma) {
  if (size == 0 || !(sigma > 0.0)) throw Error("gaussian window needs size >= 1 and sigma > 0");
  std::vector<double> w(size);
  const double c = 0.5 * static_cast<double>(size - 1);
  double sum = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double d = static_cast<double>(i) - c;
    w[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

namespace {

// Separable "valid" filtering of src with w in both directions.
Map2D filter_valid(const Map2D& src, const std::vector<double>& w) {
  const std::size_t k = w.size();
  const std::size_t orows = src.rows() - k + 1, ocols = src.cols() - k + 1;
  Map2D tmp(src.rows(), ocols);
  for (std::size_t r = 0; r < src.rows(); ++r)
    for (std::size_t c = 0; c < ocols; ++c) {
      double s = 0.0;
      for (std::size_t m = 0; m < k; ++m) s += w[m] * src(r, c + m);
      tmp(r, c) = s;
    }
  Map2D out(orows, ocols);
  for (std::size_t r = 0; r < orows; ++r)
    for (std::size_t c = 0; c < ocols; ++c) {
      double s = 0.0;
      for (std::size_t m = 0; m < k; ++m) s += w[m] * tmp(r + m, c);
      out(r, c) = s;
    }
  return out;
}

Map2D product(const Map2D& a, const Map2D& b) {
  Map2D out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
  return out;
}

}  // namespace

double ssim(const Map2D& a, const Map2D& b, const SsimParams& p) {
  if (!a.same_shape(b)) throw Error("ssim: inputs must have equal shape");
  if (a.rows() < p.window || a.cols() < p.window)
    throw Error("ssim: window " + std::to_string(p.window) + " larger than image " + std::to_string(a.rows()) + "x" +
                std::to_string(a.cols()));
  if (!(p.data_range > 0.0)) throw Error("ssim: data_range must be positive");
  const auto w = gaussian_window(p.window, p.sigma);
  const double c1 = (p.k1 * p.data_range) * (p.k1 * p.data_range);
  const double c2 = (p.k2 * p.data_range) * (p.k2 * p.data_range);

  const Map2D mu_a = filter_valid(a, w);
  const Map2D mu_b = filter_valid(b, w);
  const Map2D e_aa = filter_valid(product(a, a), w);
  const Map2D e_bb = filter_valid(product(b, b), w);
  const Map2D e_ab = filter_valid(product(a, b), w);

  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a.data()[i], mb = mu_b.data()[i];
    const double va = e_aa.data()[i] - ma * ma;
    const double vb = e_bb.data()[i] - mb * mb;
    const double cov = e_ab.data()[i] - ma * mb;
    const double num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
    const double den = (ma * ma + mb * mb + c1) * (va + vb + c2);
    total += num / den;
  }
  return total / static_cast<double>(mu_a.size());
}

Map2D minmax_normalize(const Map2D& m) {
  const double lo = min_value(m), hi = max_value(m);
  Map2D out(m.rows(), m.cols());
  if (hi > lo)
    for (std::size_t i = 0; i < m.size(); ++i) out.data()[i] = (m.data()[i] - lo) / (hi - lo);
  return out;
}

std::size_t InterconnectionMatrix::index_of(const std::string& compound) const {
  const auto it = std::find(compounds.begin(), compounds.end(), compound);
  if (it == compounds.end()) throw Error("unknown compound '" + compound + "'");
  return static_cast<std::size_t>(it - compounds.begin());
}

InterconnectionMatrix build_matrix(const std::vector<EmissionGrid>& maps, const SsimParams& params) {
  // compound -> date -> map
  std::map<std::string, std::map<std::string, const EmissionGrid*>> by_compound;
  for (const auto& g : maps) {
    if (!by_compound[g.compound].emplace(g.date, &g).second)
      throw Error("duplicate map for (" + g.compound + ", " + g.date + ")");
  }
  InterconnectionMatrix m;
  for (const auto& [c, _] : by_compound) m.compounds.push_back(c);
  const std::size_t k = m.compounds.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  m.ssim = Map2D(k, k, nan);
  m.pcc = Map2D(k, k, nan);
  m.n_pairs = Array2D<int>(k, k, 0);

  struct Task {
    std::size_t i, j;
    const EmissionGrid* a;
    const EmissionGrid* b;
    double ssim = 0.0;
    std::optional<double> pcc;
  };
  std::vector<Task> tasks;
  for (std::size_t i = 0; i < k; ++i) {
    const auto& di = by_compound[m.compounds[i]];
    m.ssim(i, i) = 1.0;
    m.pcc(i, i) = 1.0;
    m.n_pairs(i, i) = static_cast<int>(di.size());
    for (std::size_t j = i + 1; j < k; ++j) {
      const auto& dj = by_compound[m.compounds[j]];
      for (const auto& [date, gi] : di) {
        const auto it = dj.find(date);
        if (it == dj.end()) continue;
        if (!gi->values.same_shape(it->second->values))
          throw Error("maps for " + m.compounds[i] + " and " + m.compounds[j] + " on " + date + " differ in shape");
        tasks.push_back({i, j, gi, it->second});
      }
    }
  }

  SsimParams unit = params;
  unit.data_range = 1.0;
  parallel_for(static_cast<std::ptrdiff_t>(tasks.size()), [&](std::ptrdiff_t t) {
    Task& task = tasks[static_cast<std::size_t>(t)];
    task.ssim = ssim(minmax_normalize(task.a->values), minmax_normalize(task.b->values), unit);
    task.pcc = pcc(task.a->values, task.b->values);
  });

  // Tasks are generated in (i, j, date) order, so this reduction is deterministic.
  Map2D ssim_sum(k, k, 0.0), pcc_sum(k, k, 0.0);
  Array2D<int> pcc_count(k, k, 0);
  for (const auto& t : tasks) {
    ssim_sum(t.i, t.j) += t.ssim;
    m.n_pairs(t.i, t.j) += 1;
    if (t.pcc) {
      pcc_sum(t.i, t.j) += *t.pcc;
      pcc_count(t.i, t.j) += 1;
    }
  }
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) {
      m.n_pairs(j, i) = m.n_pairs(i, j);
      if (m.n_pairs(i, j) > 0) m.ssim(i, j) = m.ssim(j, i) = ssim_sum(i, j) / m.n_pairs(i, j);
      if (pcc_count(i, j) > 0) m.pcc(i, j) = m.pcc(j, i) = pcc_sum(i, j) / pcc_count(i, j);
    }
  return m;
}

RankMode parse_rank_mode(const std::string& s) {
  if (s == "most") return RankMode::most;
  if (s == "least") return RankMode::least;
  throw Error("rank mode must be 'most' or 'least', got '" + s + "'");
}

std::vector<std::string> rank_compounds(const InterconnectionMatrix& m, const std::string& reference, std::size_t k,
                                        RankMode mode) {
  const std::size_t ref = m.index_of(reference);
  if (k + 1 > m.size())
    throw Error("cannot select " + std::to_string(k) + " of " + std::to_string(m.size() - 1) + " other compounds");
  std::vector<std::pair<double, std::string>> cands;
  for (std::size_t j = 0; j < m.size(); ++j)
    if (j != ref && !std::isnan(m.ssim(ref, j))) cands.emplace_back(m.ssim(ref, j), m.compounds[j]);
  if (cands.size() < k) throw Error("only " + std::to_string(cands.size()) + " compounds share dates with " + reference);
  std::sort(cands.begin(), cands.end(), [mode](const auto& a, const auto& b) {
    if (a.first != b.first) return mode == RankMode::most ? a.first > b.first : a.first < b.first;
    return a.second < b.second;
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(cands[i].second);
  return out;
}

void write_matrix_csv(const InterconnectionMatrix& m, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write = [&](const Map2D& values, const char* name) {
    std::ofstream out(dir / name);
    if (!out) throw Error("cannot write " + (dir / name).string());
    out << "compound";
    for (const auto& c : m.compounds) out << ',' << c;
    out << '\n';
    char buf[32];
    for (std::size_t i = 0; i < m.size(); ++i) {
      out << m.compounds[i];
      for (std::size_t j = 0; j < m.size(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", values(i, j));
        out << ',' << buf;
      }
      out << '\n';
    }
  };
  write(m.ssim, "ssim.csv");
  write(m.pcc, "pcc.csv");
}

}  // namespace mbsr
