#pragma once

#include <functional>
#include <string>

namespace causalattr {

// Routes library diagnostics (ridge fallback, dropped rows, jittered
// duplicates). Default handler writes to stderr; tests install a capture.
void warn(const std::string& message);
void set_warning_handler(std::function<void(const std::string&)> handler);
void reset_warning_handler();

}  // namespace causalattr
