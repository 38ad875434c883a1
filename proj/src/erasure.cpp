#include "janus/erasure.hpp"

#include <array>
#include <cstring>

#include "janus/errors.hpp"

namespace janus {

namespace gf256 {
namespace {

struct Tables {
  std::array<std::uint8_t, 512> exp;
  std::array<std::uint8_t, 256> log;
  // full 64 KiB product table for the byte-slice hot path
  std::array<std::array<std::uint8_t, 256>, 256> mul;

  Tables() {
    int x = 1;
    for (int i = 0; i < 255; ++i) {
      exp[i] = static_cast<std::uint8_t>(x);
      log[x] = static_cast<std::uint8_t>(i);
      x <<= 1;
      if (x & 0x100) x ^= 0x11d;
    }
    for (int i = 255; i < 512; ++i) exp[i] = exp[i - 255];
    log[0] = 0;
    for (int a = 0; a < 256; ++a) {
      for (int b = 0; b < 256; ++b) {
        mul[a][b] = (a == 0 || b == 0)
                        ? 0
                        : exp[log[a] + log[b]];
      }
    }
  }
};

const Tables& tables() {
  static const Tables t;
  return t;
}

}  // namespace

std::uint8_t mul(std::uint8_t a, std::uint8_t b) { return tables().mul[a][b]; }

std::uint8_t inv(std::uint8_t a) {
  if (a == 0) throw ConfigError("zero has no inverse in GF(256)");
  const auto& t = tables();
  return t.exp[255 - t.log[a]];
}

void mul_add(std::uint8_t* dst, const std::uint8_t* src, std::uint8_t coeff,
             std::size_t len) {
  if (coeff == 0) return;
  if (coeff == 1) {
    for (std::size_t i = 0; i < len; ++i) dst[i] ^= src[i];
    return;
  }
  const std::uint8_t* row = tables().mul[coeff].data();
  for (std::size_t i = 0; i < len; ++i) dst[i] ^= row[src[i]];
}

}  // namespace gf256

GroupCode::GroupCode(int k, int m) : k_(k), m_(m) {
  if (k < 1 || m < 0 || k + m > 255)
    throw ConfigError("group code requires 1 <= k, 0 <= m, k+m <= 255");
  // Cauchy rows: coefficient (p, j) = 1 / (x_p ^ y_j) with x_p = p and
  // y_j = m + j; disjoint index sets keep every denominator non-zero and
  // make every k x k submatrix of [I; C] invertible.
  rows_.resize(m_);
  for (int p = 0; p < m_; ++p) {
    rows_[p].resize(k_);
    for (int j = 0; j < k_; ++j) {
      rows_[p][j] = gf256::inv(static_cast<std::uint8_t>(p ^ (m_ + j)));
    }
  }
}

void GroupCode::encode(const std::uint8_t* const* data,
                       std::uint8_t* const* parity, std::size_t len) const {
  for (int p = 0; p < m_; ++p) {
    std::memset(parity[p], 0, len);
    for (int j = 0; j < k_; ++j)
      gf256::mul_add(parity[p], data[j], rows_[p][j], len);
  }
}

void GroupCode::decode(
    std::vector<std::optional<std::vector<std::uint8_t>>>& fragments) const {
  const int n = k_ + m_;
  if (static_cast<int>(fragments.size()) != n)
    throw DecodeError("fragment vector must have n entries");

  std::vector<int> missing_data;
  for (int i = 0; i < k_; ++i)
    if (!fragments[i].has_value()) missing_data.push_back(i);
  if (missing_data.empty()) return;

  // Choose k present fragments, preferring data rows (identity rows keep
  // the elimination cheap).
  std::vector<int> chosen;
  std::size_t len = 0;
  for (int i = 0; i < n && static_cast<int>(chosen.size()) < k_; ++i) {
    if (fragments[i].has_value()) {
      if (chosen.empty()) {
        len = fragments[i]->size();
      } else if (fragments[i]->size() != len) {
        throw DecodeError("fragment length mismatch");
      }
      chosen.push_back(i);
    }
  }
  if (static_cast<int>(chosen.size()) < k_)
    throw DecodeError("fewer than k fragments present");

  // Solve M * data = present, where row i of M is the generator row of
  // chosen fragment i.  Gauss-Jordan over GF(256) on [M | I].
  std::vector<std::vector<std::uint8_t>> mat(k_,
                                             std::vector<std::uint8_t>(k_, 0));
  std::vector<std::vector<std::uint8_t>> invm(
      k_, std::vector<std::uint8_t>(k_, 0));
  for (int r = 0; r < k_; ++r) {
    const int idx = chosen[r];
    if (idx < k_) {
      mat[r][idx] = 1;
    } else {
      for (int j = 0; j < k_; ++j) mat[r][j] = rows_[idx - k_][j];
    }
    invm[r][r] = 1;
  }
  for (int col = 0; col < k_; ++col) {
    int pivot = -1;
    for (int r = col; r < k_; ++r) {
      if (mat[r][col] != 0) {
        pivot = r;
        break;
      }
    }
    if (pivot < 0) throw DecodeError("singular decode matrix");
    std::swap(mat[pivot], mat[col]);
    std::swap(invm[pivot], invm[col]);
    const std::uint8_t piv_inv = gf256::inv(mat[col][col]);
    for (int j = 0; j < k_; ++j) {
      mat[col][j] = gf256::mul(mat[col][j], piv_inv);
      invm[col][j] = gf256::mul(invm[col][j], piv_inv);
    }
    for (int r = 0; r < k_; ++r) {
      if (r == col || mat[r][col] == 0) continue;
      const std::uint8_t f = mat[r][col];
      for (int j = 0; j < k_; ++j) {
        mat[r][j] ^= gf256::mul(f, mat[col][j]);
        invm[r][j] ^= gf256::mul(f, invm[col][j]);
      }
    }
  }

  // data[d] = sum_r inv[d][r] * present[r]; only missing rows are rebuilt.
  for (int d : missing_data) {
    std::vector<std::uint8_t> out(len, 0);
    for (int r = 0; r < k_; ++r) {
      gf256::mul_add(out.data(), fragments[chosen[r]]->data(), invm[d][r],
                     len);
    }
    fragments[d] = std::move(out);
  }
}

}  // namespace janus
