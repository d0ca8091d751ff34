#pragma once

#include <functional>
#include <iostream>
#include <string>

namespace hirec {

/// Warning sink, default stderr. Tests swap it to capture messages.
inline std::function<void(const std::string&)>& warning_sink() {
    static std::function<void(const std::string&)> sink = [](const std::string& message) {
        std::cerr << "[hirec] warning: " << message << "\n";
    };
    return sink;
}

inline void log_warning(const std::string& message) { warning_sink()(message); }

}  // namespace hirec
