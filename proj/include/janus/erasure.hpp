#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace janus {

namespace gf256 {

/// GF(2^8) with the primitive polynomial x^8+x^4+x^3+x^2+1 (0x11d).
std::uint8_t mul(std::uint8_t a, std::uint8_t b);
std::uint8_t inv(std::uint8_t a);  // a != 0

/// dst[i] ^= coeff * src[i] over `len` bytes.
void mul_add(std::uint8_t* dst, const std::uint8_t* src, std::uint8_t coeff,
             std::size_t len);

}  // namespace gf256

/// Systematic maximum-distance-separable erasure code over GF(2^8) for one
/// group of n = k + m fragments: fragments 0..k-1 carry the data verbatim,
/// fragments k..n-1 carry parity derived from a Cauchy matrix.  Any k of
/// the n fragments reconstruct the data.  Requires 1 <= k, 0 <= m and
/// k + m <= 255.
class GroupCode {
 public:
  GroupCode(int k, int m);

  int k() const { return k_; }
  int m() const { return m_; }
  int n() const { return k_ + m_; }

  /// Computes the m parity fragments for k equal-length data fragments.
  /// `data` and `parity` are arrays of row pointers; all rows have `len`
  /// bytes.  Parity rows are overwritten.
  void encode(const std::uint8_t* const* data, std::uint8_t* const* parity,
              std::size_t len) const;

  /// Reconstructs all data fragments in place.  `fragments` holds n
  /// entries indexed by fragment index; missing fragments are nullopt.
  /// On return entries 0..k-1 are present.  Throws DecodeError when fewer
  /// than k fragments are present or rows differ in length.
  void decode(std::vector<std::optional<std::vector<std::uint8_t>>>& fragments)
      const;

  /// Parity coefficient row for parity fragment p (0..m-1), length k.
  const std::vector<std::uint8_t>& parity_row(int p) const {
    return rows_[p];
  }

 private:
  int k_;
  int m_;
  std::vector<std::vector<std::uint8_t>> rows_;  // m rows of k coefficients
};

}  // namespace janus
