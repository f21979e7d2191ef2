#pragma once

#include <Eigen/Core>

#include <cstdint>

namespace offpolicy {

template <class Scalar_, int Rows_ = Eigen::Dynamic>
using Vector = Eigen::Matrix<Scalar_, Rows_, 1>;

template <class Scalar_, int Rows_ = Eigen::Dynamic, int Cols_ = Eigen::Dynamic>
using Matrix = Eigen::Matrix<Scalar_, Rows_, Cols_>;

// Uniform double in [0, 1) from the top 53 bits of a 64-bit engine draw.
// Used instead of std::uniform_real_distribution so streams are identical
// across standard library implementations.
template <class URBG>
inline double uniform01(URBG& rng)
{
    static_assert(URBG::max() == UINT64_MAX && URBG::min() == 0,
                  "expects a full-range 64-bit generator");
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

} // namespace offpolicy
