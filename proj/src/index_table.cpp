#include "tcf/index_table.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "tcf/error.hpp"

namespace tcf {

void IndexTable::insert(int year, int month, double value) {
    if (month < 1 || month > 12) throw ValidationError("month " + std::to_string(month) + " outside 1..12");
    entries_[{year, month}] = value;
}

double IndexTable::lookup(int year, int month) const {
    const auto it = entries_.find({year, month});
    if (it == entries_.end())
        throw LookupError(name_ + " has no entry for " + std::to_string(year) + "-" + std::to_string(month));
    return it->second;
}

bool IndexTable::contains(int year, int month) const { return entries_.count({year, month}) > 0; }

void IndexTable::check_contiguous() const {
    if (entries_.empty()) return;
    auto it = entries_.begin();
    auto prev = it++;
    for (; it != entries_.end(); ++it, ++prev) {
        const int py = prev->first.first, pm = prev->first.second;
        const int ny = it->first.first, nm = it->first.second;
        const bool next_month = (nm == pm + 1 && ny == py) || (pm == 12 && nm == 1 && ny == py + 1);
        if (!next_month)
            throw ValidationError(name_ + " coverage gap after " + std::to_string(py) + "-" + std::to_string(pm));
    }
}

IndexTable IndexTable::parse(std::istream& in, const std::string& name) {
    IndexTable table(name);
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream iss(line);
        std::string ym;
        double value;
        if (!(iss >> ym)) continue;  // blank line
        if (!(iss >> value)) throw ParseError("expected 'YYYY-MM value'", line_no);
        if (ym.size() != 7 || ym[4] != '-') throw ParseError("bad month key '" + ym + "'", line_no);
        int year, month;
        try {
            year = std::stoi(ym.substr(0, 4));
            month = std::stoi(ym.substr(5, 2));
        } catch (const std::exception&) {
            throw ParseError("bad month key '" + ym + "'", line_no);
        }
        try {
            table.insert(year, month, value);
        } catch (const Error& e) {
            throw ParseError(e.what(), line_no);
        }
    }
    table.check_contiguous();
    return table;
}

IndexTable IndexTable::parse_file(const std::string& path, const std::string& name) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open index table '" + path + "'");
    return parse(in, name);
}

void IndexTable::write(std::ostream& out) const {
    out << "# " << name_ << " monthly values\n";
    for (const auto& [ym, value] : entries_) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%04d-%02d", ym.first, ym.second);
        out << buf << ' ' << value << '\n';
    }
}

void IndexTable::write_file(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    write(out);
}

}  // namespace tcf
