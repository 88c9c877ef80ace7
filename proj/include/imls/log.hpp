#pragma once

#include <string>

namespace imls {

// Thin logging facade so that translation units pulling in libtorch (which
// ships its own fmt) never include spdlog.
void log_info(const std::string& msg);
void log_warn(const std::string& msg);
void set_log_level(const std::string& level);

/// printf-style formatting into a std::string.
std::string strprintf(const char* fmt, ...) __attribute__((format(printf, 1, 2)));

}  // namespace imls
