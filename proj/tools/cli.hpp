#pragma once

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace reprosamp::cli {

inline constexpr const char* kVersion = "0.1.0";

struct Dataset {
    std::vector<double> values;
    std::string source;
    std::size_t n = 0;
    std::optional<std::string> column_name;
};

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Comma-separated text, one record per line. The first row is a header when any
// of its cells is non-numeric. `column` is a header name or a 0-based index.
Dataset parse_dataset(std::istream& in, const std::string& source, const std::optional<std::string>& column = {});
Dataset load_dataset(const std::string& path, const std::optional<std::string>& column = {});

struct RunRecord {
    std::string command_line;
    nlohmann::json config;
    std::uint64_t seed = 0;
    std::string version = kVersion;
    std::string timestamp;
    std::string digest;

    nlohmann::json to_json() const;
};

std::string sha256_hex(const std::string& data);

// Exit codes: 0 success, 1 runtime error, 2 usage error.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace reprosamp::cli
