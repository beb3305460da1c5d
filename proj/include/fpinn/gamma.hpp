#pragma once

namespace fpinn {

/// Gamma function for positive real arguments (Lanczos approximation,
/// relative error below 1e-14 on (0.1, 20]). Throws std::domain_error
/// for non-positive or non-finite z.
double gamma(double z);

} // namespace fpinn
