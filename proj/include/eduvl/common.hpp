#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

namespace eduvl {

// Malformed user input (corpus files, configs, CLI values). The CLI maps
// this to exit code 2.
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Exhaustive-search size guard exceeded.
struct SizeGuardError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite loss or gradient during training. The message names the first
// offending tensor.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Split { train, validation, test };

std::string to_string(Split s);
Split split_from_string(std::string_view s);

namespace io {

uint64_t fnv1a64(std::string_view bytes);
uint64_t fnv1a64_file(const std::filesystem::path& path);
std::string read_file(const std::filesystem::path& path);

// Write-temp-then-rename so readers never observe a partial file.
void atomic_write(const std::filesystem::path& path, std::string_view content);

}  // namespace io
}  // namespace eduvl
