#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <utility>

namespace tcf {

// Monthly scalar index (Nino3.4 SST anomaly). Two-column text format:
// "YYYY-MM value" per line, '#' comments allowed. Coverage must be a
// contiguous run of months; lookups are exact, never interpolated.
class IndexTable {
  public:
    IndexTable() = default;
    explicit IndexTable(std::string name) : name_(std::move(name)) {}

    void insert(int year, int month, double value);
    double lookup(int year, int month) const;  // throws LookupError when absent
    bool contains(int year, int month) const;
    std::size_t size() const { return entries_.size(); }
    const std::string& name() const { return name_; }

    // Throws ValidationError if months are not contiguous.
    void check_contiguous() const;

    static IndexTable parse(std::istream& in, const std::string& name);
    static IndexTable parse_file(const std::string& path, const std::string& name);
    void write(std::ostream& out) const;
    void write_file(const std::string& path) const;

  private:
    std::string name_ = "nino34";
    std::map<std::pair<int, int>, double> entries_;
};

}  // namespace tcf
