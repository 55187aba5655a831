#pragma once

namespace h2p {

/// Threads used for line-parallel sweeps and reductions in the calling
/// thread. Results never depend on this value.
int worker_threads();
void set_worker_threads(int n);

}  // namespace h2p
