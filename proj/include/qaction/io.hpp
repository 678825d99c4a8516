#ifndef QACTION_IO_HPP
#define QACTION_IO_HPP

#include "qaction/errors.hpp"

#include <charconv>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace qaction
{

inline constexpr std::string_view version = "1.0.0";

/// Key/value lines written as `# key: value` above a CSV header row.
using Provenance = std::vector< std::pair< std::string, std::string > >;

/// 17 significant digits; round-trips every double.
inline std::string format_real(double v)
{
    std::ostringstream out;
    out << std::setprecision(17) << v;
    return out.str();
}

inline void write_provenance(std::ostream& out, const Provenance& p)
{
    for (const auto& [k, v] : p)
        out << "# " << k << ": " << v << '\n';
}

inline std::vector< std::string > split_csv_line(const std::string& line)
{
    std::vector< std::string > cells;
    std::string                cell;
    std::istringstream         in{line};
    while (std::getline(in, cell, ','))
        cells.push_back(cell);
    if (!line.empty() && line.back() == ',')
        cells.emplace_back();
    return cells;
}

inline double parse_csv_real(const std::string& s)
{
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw ConfigError("csv_parse", "cannot parse '" + s + "' as a number");
    return v;
}

/// Reads provenance comments, the header row and the data rows of a CSV.
struct CsvDocument
{
    Provenance                                provenance;
    std::vector< std::string >                header;
    std::vector< std::vector< std::string > > rows;
};

inline CsvDocument read_csv(std::istream& in)
{
    CsvDocument doc;
    std::string line;
    while (std::getline(in, line))
    {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        if (line.front() == '#')
        {
            const auto colon = line.find(": ");
            if (colon != std::string::npos && line.size() > 2)
                doc.provenance.emplace_back(line.substr(2, colon - 2), line.substr(colon + 2));
            continue;
        }
        if (doc.header.empty())
            doc.header = split_csv_line(line);
        else
            doc.rows.push_back(split_csv_line(line));
    }
    if (doc.header.empty())
        throw ConfigError("csv_parse", "missing CSV header row");
    for (const auto& r : doc.rows)
        if (r.size() != doc.header.size())
            throw ConfigError("csv_parse", "row width does not match header");
    return doc;
}

} // namespace qaction

#endif // QACTION_IO_HPP
