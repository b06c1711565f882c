#ifndef SSDE_LOG_HPP
#define SSDE_LOG_HPP

#include <string_view>

namespace ssde::log {

/// Reads SSDE_LOG (error|info|debug); default is error.
void init_from_env();

void error(std::string_view msg);
void info(std::string_view msg);
void debug(std::string_view msg);

}  // namespace ssde::log

#endif  // SSDE_LOG_HPP
