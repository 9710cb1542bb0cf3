#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <string>

#include "dncnn/error.hpp"

namespace dncnn::detail {

// Shortest decimal form that reads back to the same double.
inline std::string shortest(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw Error("failed writing " + path.string());
}

}  // namespace dncnn::detail
