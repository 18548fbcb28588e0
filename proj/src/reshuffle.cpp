#include "bell/reshuffle.hpp"

#include <algorithm>
#include <cstdlib>
#include <limits>
#include <optional>

#include "bell/errors.hpp"

namespace bell::reshuffle {

namespace {

int sgn(int idx) { return 1 - 2 * idx; }

long corr_count(const CountMatrix& t) {
  long c = 0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) c += sgn(a) * sgn(b) * t[a][b];
  return c;
}

using Grid2 = std::array<std::array<long, 2>, 2>;
using Tensor3 = std::array<Grid2, 2>;            // [u][b][bp]
using Tensor4 = std::array<std::array<Grid2, 2>, 2>;  // [a][ap][b][bp]

// Nonnegative integer 2x2 with row sums r, column sums c, entry caps.
// Requires sum(r) == sum(c); the feasible X[0][0] values form an interval.
std::optional<Grid2> solve_2x2(const std::array<long, 2>& r,
                               const std::array<long, 2>& c,
                               const Grid2& cap) {
  const long tlo =
      std::max({0L, r[0] - cap[0][1], c[0] - cap[1][0], c[0] - r[1]});
  const long thi = std::min({cap[0][0], r[0], c[0], c[0] - r[1] + cap[1][1]});
  if (tlo > thi) return std::nullopt;
  const long t = tlo;
  Grid2 x{{{t, r[0] - t}, {c[0] - t, r[1] - c[0] + t}}};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      if (x[i][j] < 0 || x[i][j] > cap[i][j])
        throw internal_error("transportation cell left its bounds");
  return x;
}

// n3[u][b][bp] >= 0 with margins nUB (summed over bp), nUBp (over b),
// M (over u). Solved on the bp=0 slice; the bp=1 slice is the remainder.
std::optional<Tensor3> triangle(const CountMatrix& n_ub,
                                const CountMatrix& n_ubp, const Grid2& m) {
  const std::array<long, 2> r{n_ubp[0][0], n_ubp[1][0]};
  const std::array<long, 2> c{m[0][0], m[1][0]};
  const auto x = solve_2x2(r, c, n_ub);
  if (!x) return std::nullopt;
  Tensor3 n3{};
  for (int u = 0; u < 2; ++u)
    for (int b = 0; b < 2; ++b) {
      n3[u][b][0] = (*x)[u][b];
      n3[u][b][1] = n_ub[u][b] - (*x)[u][b];
    }
  return n3;
}

std::optional<Grid2> northwest(const std::array<long, 2>& r,
                               const std::array<long, 2>& c) {
  const long g = std::min(r[0], c[0]);
  Grid2 out{{{g, r[0] - g}, {c[0] - g, r[1] - c[0] + g}}};
  for (const auto& row : out)
    for (long v : row)
      if (v < 0) return std::nullopt;
  return out;
}

std::optional<Tensor4> construct(const std::array<CountMatrix, 4>& t, long n) {
  const CountMatrix& n_ab = t[0];
  const CountMatrix& n_abp = t[1];
  const CountMatrix& n_apb = t[2];
  const CountMatrix& n_apbp = t[3];
  const long nb0 = n_ab[0][0] + n_ab[1][0];
  const long nbp0 = n_abp[0][0] + n_abp[1][0];
  const long mlo = std::max(0L, nb0 + nbp0 - n);
  const long mhi = std::min(nb0, nbp0);
  for (long m = mlo; m <= mhi; ++m) {
    const Grid2 mm{{{m, nb0 - m}, {nbp0 - m, n - nb0 - nbp0 + m}}};
    if (mm[0][1] < 0 || mm[1][0] < 0 || mm[1][1] < 0) continue;
    const auto n3a = triangle(n_ab, n_abp, mm);
    if (!n3a) continue;
    const auto n3ap = triangle(n_apb, n_apbp, mm);
    if (!n3ap) continue;
    Tensor4 n4{};
    bool ok = true;
    for (int b = 0; b < 2 && ok; ++b)
      for (int bp = 0; bp < 2 && ok; ++bp) {
        const std::array<long, 2> r{(*n3a)[0][b][bp], (*n3a)[1][b][bp]};
        const std::array<long, 2> c{(*n3ap)[0][b][bp], (*n3ap)[1][b][bp]};
        if (r[0] + r[1] != c[0] + c[1] || r[0] + r[1] != mm[b][bp]) {
          ok = false;
          break;
        }
        const auto g = northwest(r, c);
        if (!g) {
          ok = false;
          break;
        }
        for (int a = 0; a < 2; ++a)
          for (int ap = 0; ap < 2; ++ap) n4[a][ap][b][bp] = (*g)[a][ap];
      }
    if (ok) return n4;
  }
  return std::nullopt;
}

std::array<CountMatrix, 4> marginals_of(const Tensor4& n4) {
  std::array<CountMatrix, 4> m{};
  for (int a = 0; a < 2; ++a)
    for (int ap = 0; ap < 2; ++ap)
      for (int b = 0; b < 2; ++b)
        for (int bp = 0; bp < 2; ++bp) {
          const long v = n4[a][ap][b][bp];
          m[0][a][b] += v;
          m[1][a][bp] += v;
          m[2][ap][b] += v;
          m[3][ap][bp] += v;
        }
  return m;
}

}  // namespace

long CountTable::total() const {
  long n = 0;
  for (const auto& row : tables[0])
    for (long v : row) n += v;
  return n;
}

void CountTable::validate() const {
  long first = -1;
  for (const CountMatrix& t : tables) {
    long n = 0;
    for (const auto& row : t)
      for (long v : row) {
        if (v < 0) throw input_error("counts must be nonnegative");
        n += v;
      }
    if (first < 0)
      first = n;
    else if (n != first)
      throw input_error("all four tables must have the same total");
  }
}

CountTable CountTable::from_pair_sheets(
    const std::array<experiment::PairSheet, 4>& sheets) {
  CountTable ct;
  for (int i = 0; i < 4; ++i) {
    const experiment::PairSheet& s = sheets[i];
    if (s.a.size() != s.b.size()) throw input_error("sheet arm lengths differ");
    for (std::size_t t = 0; t < s.n(); ++t) {
      const int ia = s.a[t] == 1 ? 0 : 1;
      const int ib = s.b[t] == 1 ? 0 : 1;
      if ((s.a[t] != 1 && s.a[t] != -1) || (s.b[t] != 1 && s.b[t] != -1))
        throw input_error("outcomes must be +1 or -1");
      ++ct.tables[i][ia][ib];
    }
  }
  ct.validate();
  return ct;
}

CountTable CountTable::from_quadruples(const experiment::QuadrupleSheet& sheet) {
  CountTable ct;
  for (const auto& row : sheet.rows) {
    int idx[4];
    for (int k = 0; k < 4; ++k) {
      if (row[k] != 1 && row[k] != -1)
        throw input_error("outcomes must be +1 or -1");
      idx[k] = row[k] == 1 ? 0 : 1;
    }
    ++ct.tables[0][idx[0]][idx[2]];
    ++ct.tables[1][idx[0]][idx[3]];
    ++ct.tables[2][idx[1]][idx[2]];
    ++ct.tables[3][idx[1]][idx[3]];
  }
  return ct;
}

ReshuffleResult reshuffle_feasibility(const CountTable& counts) {
  counts.validate();
  const auto& t = counts.tables;
  const long n = counts.total();
  ReshuffleResult res;

  const long cc[4] = {corr_count(t[0]), corr_count(t[1]), corr_count(t[2]),
                      corr_count(t[3])};
  const int pats[4][4] = {
      {-1, 1, 1, 1}, {1, -1, 1, 1}, {1, 1, -1, 1}, {1, 1, 1, -1}};
  res.max_count_excess = std::numeric_limits<long>::min();
  for (const auto& p : pats) {
    long s = 0;
    for (int i = 0; i < 4; ++i) s += p[i] * cc[i];
    res.max_count_excess = std::max(res.max_count_excess, std::abs(s) - 2 * n);
  }

  const auto row_sum = [](const CountMatrix& m, int r) {
    return m[r][0] + m[r][1];
  };
  const auto col_sum = [](const CountMatrix& m, int c) {
    return m[0][c] + m[1][c];
  };
  struct MarginCheck {
    long lhs, rhs;
    const char* what;
  };
  const MarginCheck checks[] = {
      {row_sum(t[0], 0), row_sum(t[1], 0),
       "count of A=+1 at x differs between y contexts"},
      {row_sum(t[0], 1), row_sum(t[1], 1),
       "count of A=-1 at x differs between y contexts"},
      {row_sum(t[2], 0), row_sum(t[3], 0),
       "count of A=+1 at x' differs between y contexts"},
      {row_sum(t[2], 1), row_sum(t[3], 1),
       "count of A=-1 at x' differs between y contexts"},
      {col_sum(t[0], 0), col_sum(t[2], 0),
       "count of B=+1 at y differs between x contexts"},
      {col_sum(t[0], 1), col_sum(t[2], 1),
       "count of B=-1 at y differs between x contexts"},
      {col_sum(t[1], 0), col_sum(t[3], 0),
       "count of B=+1 at y' differs between x contexts"},
      {col_sum(t[1], 1), col_sum(t[3], 1),
       "count of B=-1 at y' differs between x contexts"},
  };
  for (const MarginCheck& c : checks) {
    if (c.lhs != c.rhs) {
      res.violated_condition = c.what;
      return res;
    }
  }

  for (const auto& p : pats) {
    long s = 0;
    for (int i = 0; i < 4; ++i) s += p[i] * cc[i];
    if (s > 2 * n || s < -2 * n) {
      std::string msg = "count inequality |";
      const char* names[4] = {"C(x,y)", "C(x,y')", "C(x',y)", "C(x',y')"};
      for (int i = 0; i < 4; ++i) {
        if (i > 0) msg += p[i] > 0 ? " + " : " - ";
        else if (p[i] < 0) msg += "-";
        msg += names[i];
      }
      msg += "| <= 2N failed: " + std::to_string(s) + " vs " +
             std::to_string(2 * n);
      res.violated_condition = msg;
      return res;
    }
  }

  const auto n4 = construct(t, n);
  if (!n4)
    throw internal_error(
        "construction failed although margins and count inequalities hold");
  const auto got = marginals_of(*n4);
  for (int i = 0; i < 4; ++i)
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c)
        if (got[i][r][c] != t[i][r][c])
          throw internal_error("witness does not reproduce the input tables");

  res.feasible = true;
  for (int a = 0; a < 2; ++a)
    for (int ap = 0; ap < 2; ++ap)
      for (int b = 0; b < 2; ++b)
        for (int bp = 0; bp < 2; ++bp)
          res.witness[static_cast<std::size_t>(a * 8 + ap * 4 + b * 2 + bp)] =
              (*n4)[a][ap][b][bp];
  return res;
}

}  // namespace bell::reshuffle
