#include "eduvl/common.hpp"

#include <fstream>
#include <sstream>

namespace eduvl {

std::string to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::validation: return "validation";
        case Split::test: return "test";
    }
    return "train";
}

Split split_from_string(std::string_view s) {
    if (s == "train") return Split::train;
    if (s == "validation" || s == "val") return Split::validation;
    if (s == "test") return Split::test;
    throw InputError("unknown split tag: " + std::string(s));
}

namespace io {

uint64_t fnv1a64(std::string_view bytes) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.is_open()) throw InputError("cannot open file: " + path.string());
    std::ostringstream out;
    out << in.rdbuf();
    if (in.bad()) throw InputError("failed reading file: " + path.string());
    return out.str();
}

uint64_t fnv1a64_file(const std::filesystem::path& path) {
    return fnv1a64(read_file(path));
}

void atomic_write(const std::filesystem::path& path, std::string_view content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out.is_open()) throw InputError("cannot open file for writing: " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out.good()) throw InputError("failed writing file: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace io
}  // namespace eduvl
