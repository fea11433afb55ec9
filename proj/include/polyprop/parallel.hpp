#ifndef POLYPROP_PARALLEL_HPP
#define POLYPROP_PARALLEL_HPP

#include <functional>

namespace polyprop {

/// Worker count: POLYPROP_THREADS if set and positive, else the hardware concurrency.
int thread_count();

/// Calls f(i) for i in [0, n) on up to thread_count() threads. The first exception thrown by
/// any call is rethrown after all workers finish.
void parallel_for(int n, const std::function<void(int)>& f);

}  // namespace polyprop

#endif
