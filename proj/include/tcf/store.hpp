#pragma once

#include <map>
#include <string>
#include <vector>

#include "tcf/sample.hpp"

namespace tcf {

// On-disk sample store:
//   <dir>/manifest.json        storm index, grid geometry, source checksums
//   <dir>/samples/<id>.bin     per-storm binary sample records
//   <dir>/splits/<name>.txt    storm ids, one per line (train/val/test)
// Single writer, many readers; storms are immutable once written.
class SampleStore {
  public:
    struct StormMeta {
        std::string storm_id;
        std::string name;
        int mode_label = -1;
        long n_samples = 0;
        std::string first_time;  // YYYYMMDDHH
        std::string last_time;
    };

    static SampleStore create(const std::string& dir, int grid, double half_width);
    static SampleStore open(const std::string& dir);

    // Writer API.
    void add_storm(const std::string& name, int mode_label, const std::vector<TcSample>& samples);
    void set_source_checksum(const std::string& source, const std::string& checksum);
    void write_split(const std::string& split_name, const std::vector<std::string>& storm_ids);
    void finalize();  // writes the manifest

    // Reader API.
    const std::vector<StormMeta>& storms() const { return storms_; }
    std::vector<std::string> storm_ids() const;
    std::vector<TcSample> load_storm(const std::string& storm_id) const;
    std::vector<TcSample> load_split(const std::string& split_name) const;  // concatenated samples
    std::vector<std::string> split_ids(const std::string& split_name) const;
    bool has_split(const std::string& split_name) const;
    int grid() const { return grid_; }
    double half_width() const { return half_width_; }
    const std::string& dir() const { return dir_; }

  private:
    std::string dir_;
    int grid_ = 25;
    double half_width_ = 12.5;
    bool writable_ = false;
    std::vector<StormMeta> storms_;
    std::map<std::string, std::string> source_checksums_;
};

}  // namespace tcf
