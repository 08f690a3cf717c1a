#ifndef OTLOSS_VERSION_HPP_
#define OTLOSS_VERSION_HPP_

namespace otloss {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace otloss

#endif  // OTLOSS_VERSION_HPP_
