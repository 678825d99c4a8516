#ifndef QACTION_CONFIG_HPP
#define QACTION_CONFIG_HPP

#include "qaction/errors.hpp"
#include "qaction/potential.hpp"

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>

namespace qaction
{

namespace detail
{
inline std::string trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string{s.substr(first, last - first + 1)};
}

inline double parse_real(const std::string& key, const std::string& text)
{
    double value = 0.0;
    const auto* begin = text.data();
    const auto* end   = text.data() + text.size();
    auto [ptr, ec]    = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end || !std::isfinite(value))
        throw ConfigError("config_invalid_value", "key '" + key + "': cannot parse '" + text + "' as a real number");
    return value;
}
} // namespace detail

/// Parses the `key = value` action format. Blank lines and `#` comments are
/// ignored. The accepted key set depends on `dimension`:
///   1: dimension, mass, v0, v2, v4, v6
///   2: dimension, mass, v0, v2, v22, v4
/// `dimension` and `mass` are required, missing coefficients default to 0.
inline AnyActionSpec parse_action_config(std::string_view text)
{
    std::map< std::string, std::string > entries;
    std::istringstream                   in{std::string{text}};
    std::string                          line;
    int                                  line_no = 0;
    while (std::getline(in, line))
    {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        const auto body = detail::trim(line);
        if (body.empty())
            continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config_syntax", "line " + std::to_string(line_no) + ": expected 'key = value'");
        auto key   = detail::trim(std::string_view{body}.substr(0, eq));
        auto value = detail::trim(std::string_view{body}.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError("config_syntax", "line " + std::to_string(line_no) + ": empty key or value");
        if (!entries.emplace(key, value).second)
            throw ConfigError("config_duplicate_key", "duplicate key '" + key + "'");
    }

    if (!entries.contains("dimension"))
        throw ConfigError("config_missing_key", "missing key 'dimension'");
    if (!entries.contains("mass"))
        throw ConfigError("config_missing_key", "missing key 'mass'");

    const auto& dim_text = entries.at("dimension");
    if (dim_text != "1" && dim_text != "2")
        throw ConfigError("config_invalid_value", "dimension must be 1 or 2, got '" + dim_text + "'");
    const int dim = dim_text == "1" ? 1 : 2;

    const std::set< std::string > allowed = dim == 1 ? std::set< std::string >{"dimension", "mass", "v0", "v2", "v4", "v6"}
                                                     : std::set< std::string >{"dimension", "mass", "v0", "v2", "v22", "v4"};
    for (const auto& [key, value] : entries)
        if (!allowed.contains(key))
            throw ConfigError("config_unknown_key", "unknown key '" + key + "' for dimension " + dim_text);

    auto get = [&](const std::string& key) {
        const auto it = entries.find(key);
        return it == entries.end() ? 0.0 : detail::parse_real(key, it->second);
    };

    AnyActionSpec spec;
    if (dim == 1)
        spec = ActionSpec1D{get("mass"), Potential1D{get("v0"), get("v2"), get("v4"), get("v6")}};
    else
        spec = ActionSpec2D{get("mass"), Potential2D{get("v0"), get("v2"), get("v22"), get("v4")}};
    std::visit([](const auto& s) { s.validate(); }, spec);
    return spec;
}

inline std::string read_text_file(const std::filesystem::path& path)
{
    std::ifstream in{path, std::ios::binary};
    if (!in)
        throw ConfigError("config_not_found", "cannot open '" + path.string() + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

inline AnyActionSpec read_action_config(const std::filesystem::path& path)
{
    return parse_action_config(read_text_file(path));
}

/// Round-trips through parse_action_config.
template < PolynomialPotential P >
std::string format_action_config(const ActionSpec< P >& spec)
{
    std::ostringstream out;
    out << std::setprecision(17);
    out << "dimension = " << P::dimension << '\n';
    out << "mass = " << spec.mass << '\n';
    const auto c = spec.potential.coefficients();
    for (std::size_t i = 0; i < P::n_coefficients; ++i)
        out << P::names[i] << " = " << c[i] << '\n';
    return out.str();
}

/// 64-bit FNV-1a, used to tag output files with the configuration they came from.
inline std::uint64_t fnv1a(std::string_view data) noexcept
{
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (const unsigned char c : data)
    {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

inline std::string hex64(std::uint64_t value)
{
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << value;
    return out.str();
}

} // namespace qaction

#endif // QACTION_CONFIG_HPP
