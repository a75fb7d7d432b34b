#pragma once

#include <cstddef>
#include <exception>

namespace sodef::par {

/// Execution mode for the batch kernels. Every kernel has a serial path that
/// produces byte-identical results to the OpenMP path; tests and the
/// benchmark run both.
enum class Mode { Serial, Parallel };

/// Worker cap for Mode::Parallel: SODEF_NUM_THREADS when set and positive,
/// otherwise the OpenMP default (1 without OpenMP).
int max_threads();

namespace detail {
template <class F>
void run_serial(std::size_t n, F& body) {
    for (std::size_t i = 0; i < n; ++i) body(i);
}
}  // namespace detail

/// Index loop over [0, n). Bodies must be independent across i and write only
/// to their own output slots, so both modes produce identical bytes. The
/// first exception thrown by any body is rethrown after the loop.
template <class F>
void for_each_index(std::size_t n, Mode mode, F&& body) {
#ifdef _OPENMP
    if (mode == Mode::Parallel && n > 1 && max_threads() > 1) {
        std::exception_ptr err;
#pragma omp parallel for schedule(static) num_threads(max_threads())
        for (long long i = 0; i < static_cast<long long>(n); ++i) {
            try {
                body(static_cast<std::size_t>(i));
            } catch (...) {
#pragma omp critical(sodef_par_err)
                if (!err) err = std::current_exception();
            }
        }
        if (err) std::rethrow_exception(err);
        return;
    }
#else
    (void)mode;
#endif
    detail::run_serial(n, body);
}

}  // namespace sodef::par
