#pragma once

#include <vector>

namespace gibbsctrl {

// Thomas algorithm for tridiagonal systems. lower/diag/upper are the three
// bands (lower[0] and upper[n-1] unused); rhs is overwritten with the
// solution. scratch must have size >= n.
inline void solve_tridiagonal(const double* lower, const double* diag,
                              const double* upper, double* rhs, int n,
                              double* scratch) {
    scratch[0] = upper[0] / diag[0];
    rhs[0] = rhs[0] / diag[0];
    for (int i = 1; i < n; ++i) {
        double m = 1.0 / (diag[i] - lower[i] * scratch[i - 1]);
        scratch[i] = upper[i] * m;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) * m;
    }
    for (int i = n - 2; i >= 0; --i) rhs[i] -= scratch[i] * rhs[i + 1];
}

}  // namespace gibbsctrl
