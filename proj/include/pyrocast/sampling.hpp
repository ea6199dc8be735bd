#pragma once

#include <memory>
#include <optional>

#include "pyrocast/datacube.hpp"
#include "pyrocast/rng.hpp"

namespace pyrocast {

// The four dataset views of one (pixel, day) prediction task. All share the
// same records; only the payload geometry differs.
enum class Modality { pixel, temporal, spatial, spatiotemporal };

std::string to_string(Modality m);
Modality modality_from(const std::string& s);

// payload dimensions for a given input feature count
std::vector<std::int64_t> modality_dims(Modality m, std::int64_t n_features,
                                        std::int64_t n_dynamic, std::int64_t days = 10,
                                        std::int64_t patch = 25);

constexpr std::int64_t kWindowDays = 10;
constexpr std::int64_t kPatch = 25;

struct SampleKey {
    std::int32_t row = 0;
    std::int32_t col = 0;
    Date target_date;
    std::uint8_t label = 0;
    std::uint8_t landcover = 0;

    auto operator<=>(const SampleKey&) const = default;
};

// Payload extraction. The input window is the 10 days before target_date
// (chronological); patches are 25x25 centered on the cell with edge
// replication at the borders. Static features repeat over days. Returns false
// when the window contains NaN anywhere (record rejected); throws bounds_error
// for a target date without a full window or a cell outside the grid.
bool extract_pixel(const Datacube& cube, std::int64_t row, std::int64_t col, Date target,
                   std::vector<float>& out);
bool extract_temporal(const Datacube& cube, std::int64_t row, std::int64_t col, Date target,
                      std::vector<float>& out);
bool extract_spatial(const Datacube& cube, std::int64_t row, std::int64_t col, Date target,
                     std::vector<float>& out);
bool extract_spatiotemporal(const Datacube& cube, std::int64_t row, std::int64_t col,
                            Date target, std::vector<float>& out);
bool extract_payload(const Datacube& cube, Modality m, std::int64_t row, std::int64_t col,
                     Date target, std::vector<float>& out);

// Every labeled pixel of every event day, no subsampling. Positives whose
// spatiotemporal window contains NaN cannot be materialized in every modality;
// they are excluded from the plan and reported through `rejected` rather than
// dropped silently.
std::vector<SampleKey> collect_positives(const Datacube& cube,
                                         std::vector<SampleKey>* rejected = nullptr);

struct NegativeSamplingReport {
    // per land-cover class: positives seen, negatives requested and drawn
    struct ClassLine {
        std::uint8_t landcover = 0;
        std::int64_t positives = 0;
        std::int64_t requested = 0;
        std::int64_t drawn = 0;
    };
    std::vector<ClassLine> classes;
    std::int64_t no_fire_days = 0;
    std::int64_t nan_rejected = 0;
    bool shortfall() const {
        for (const auto& c : classes)
            if (c.drawn < c.requested) return true;
        return false;
    }
};

struct SamplingConfig {
    double ratio = 2.0;  // negatives per positive, per land-cover class
    // false: candidate days are days with no fire anywhere in the region;
    // true: any cell-day whose target is 0 qualifies
    bool pixel_level_negatives = false;
};

// Stratified negative sampling: per land-cover class c with p_c positives,
// draw round(ratio * p_c) candidates uniformly without replacement from the
// no-fire pool of that class. Candidates whose spatiotemporal window contains
// NaN are discarded and redrawn; an exhausted pool leaves a reported
// shortfall, never spillover from other classes.
std::vector<SampleKey> sample_negatives(const Datacube& cube,
                                        const std::vector<SampleKey>& positives,
                                        const SamplingConfig& config, RngStream rng,
                                        NegativeSamplingReport* report = nullptr);

struct SplitConfig {
    std::vector<int> train_years;
    std::vector<int> validation_years;
    std::vector<int> test_years;

    void validate() const;  // overlapping sets -> config_error
    nlohmann::json to_json() const;
    static SplitConfig from_json(const nlohmann::json& j);
};

struct SplitKeys {
    std::vector<SampleKey> train;
    std::vector<SampleKey> validation;
    std::vector<SampleKey> test;
    std::int64_t dropped = 0;  // target-date years outside every split
};

// assignment solely by the year of target_date
SplitKeys split_by_time(const std::vector<SampleKey>& keys, const SplitConfig& config);

// Per-channel z-scoring fitted on a training set: pixel payloads standardize
// each of their scalar features; windowed payloads pool statistics over all
// samples, days and patch cells per feature channel. Population standard
// deviation. Zero-variance channels are dropped from the payload and listed.
struct Standardization {
    Modality modality = Modality::pixel;
    std::vector<double> mean;
    std::vector<double> stddev;
    std::vector<std::int64_t> dropped;  // channel indices in the unstandardized layout

    nlohmann::json to_json() const;
    static Standardization from_json(const nlohmann::json& j);
};

// one modality+split worth of materialized records
struct SampleSet {
    Modality modality = Modality::pixel;
    std::vector<std::int64_t> dims;  // payload shape per record
    std::uint64_t schema_hash = 0;
    Date cube_start;
    std::uint64_t seed = 0;
    std::string split_name;  // train / validation / test / ""
    nlohmann::json provenance;
    std::vector<SampleKey> keys;
    std::vector<std::vector<float>> payloads;
    // present once payloads have been standardized (recorded in the file header)
    std::optional<Standardization> stats;

    std::int64_t payload_size() const;
    void validate() const;
};

// Extracts payloads for every key. Keys are assumed pre-screened (the plan
// builder uses the spatiotemporal window as the NaN gate for all modalities),
// so a NaN here is a state error.
SampleSet build_sample_set(const Datacube& cube, Modality m,
                           const std::vector<SampleKey>& keys);

Standardization fit_standardization(const SampleSet& train);

// Rewrites payloads in place as z-scores, removes dropped channels (dims
// shrink), and records the stats in the set. Standardizing twice is an error.
void apply_standardization(const Standardization& stats, SampleSet& set);

// Standardizes a single freshly extracted payload with the same float
// arithmetic apply_standardization uses on stored sets, dropping the same
// channels. `raw_dims` is the unstandardized shape for `m`. Map rendering
// relies on this matching the stored-sample path bit for bit.
std::vector<float> standardize_one(const Standardization& stats, Modality m,
                                   const std::vector<std::int64_t>& raw_dims, const float* raw);

// One experiment shares a single set of statistics across its modalities so
// the models see comparable inputs: fit on the pixel training set, then slice
// out the first n_features channels (current-day values) for the windowed
// payload layouts. The dynamic-mean channels stay pixel-only.
Standardization slice_standardization(const Standardization& pixel_stats, Modality m,
                                      std::int64_t n_features);

// PFS sample file round-trip; bit-exact including NaN payloads
void save_samples(const std::string& path, const SampleSet& set);
SampleSet load_samples(const std::string& path);

// Batch access used by training and evaluation. Payloads arrive standardized
// when stats are attached; metadata (keys, dims) is always in memory. fetch
// may be called from several threads at once.
class SampleSource {
  public:
    virtual ~SampleSource() = default;
    virtual std::int64_t size() const = 0;
    virtual const std::vector<std::int64_t>& dims() const = 0;
    virtual const SampleKey& key(std::int64_t i) const = 0;
    // writes dims()-shaped payload for record i
    virtual void fetch(std::int64_t i, float* out) const = 0;

    std::int64_t payload_size() const;
};

// whole set in memory
class MemorySampleSource : public SampleSource {
  public:
    explicit MemorySampleSource(SampleSet set, const Standardization* stats = nullptr);
    std::int64_t size() const override;
    const std::vector<std::int64_t>& dims() const override;
    const SampleKey& key(std::int64_t i) const override;
    void fetch(std::int64_t i, float* out) const override;

  private:
    SampleSet set_;
};

// records fetched from the PFS file on demand (large modalities)
class FileSampleSource : public SampleSource {
  public:
    explicit FileSampleSource(const std::string& path, const Standardization* stats = nullptr);
    ~FileSampleSource() override;
    std::int64_t size() const override;
    const std::vector<std::int64_t>& dims() const override;
    const SampleKey& key(std::int64_t i) const override;
    void fetch(std::int64_t i, float* out) const override;
    // file header metadata (modality, schema hash, split name); payloads stay on disk
    const SampleSet& meta() const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace pyrocast
