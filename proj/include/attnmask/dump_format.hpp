#pragma once

// ATND v1: binary container for per-step, per-layer attention captured from a
// text-to-image sampler. All integers are unsigned 32-bit little-endian, all
// tensor values float32 little-endian.
//
//   "ATND" | version | layout:u8 dtype:u8 text_first:u8 reserved:u8
//   | steps | layers | num_tokens | height | width | heads
//   | num_tokens x (byte_len, utf8 bytes) | num_tokens x valid:u8
//   | steps*layers x (step, layer, values[record_values()])
//
// Records are stored t-major, l-minor. Joint payloads are row-major
// [query][key][head] over the (hw + N) concatenated sequence; CrossOnly
// payloads are row-major [token][pixel][head].

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace attnmask {

inline constexpr char kDumpMagic[4] = {'A', 'T', 'N', 'D'};
inline constexpr std::uint32_t kDumpVersion = 1;
inline constexpr double kSoftmaxRowTolerance = 1e-3;

enum class Layout : std::uint8_t { Joint = 0, CrossOnly = 1 };
enum class DType : std::uint8_t { Float32LE = 0 };

const char* to_string(Layout layout);

struct DumpHeader {
    std::uint32_t version = kDumpVersion;
    Layout layout = Layout::Joint;
    std::uint32_t steps = 1;
    std::uint32_t layers = 1;
    std::uint32_t num_tokens = 1;
    std::uint32_t height = 1;
    std::uint32_t width = 1;
    std::uint32_t heads = 1;
    DType dtype = DType::Float32LE;
    bool text_first = true;

    std::size_t latent_pixels() const { return std::size_t{height} * width; }
    std::size_t sequence_length() const { return latent_pixels() + num_tokens; }
    std::size_t record_values() const;
    std::size_t record_count() const { return std::size_t{steps} * layers; }

    /// Throws ConfigError when a dimension is zero or the version/dtype is unsupported.
    void validate() const;

    bool operator==(const DumpHeader&) const = default;
};

struct TokenTable {
    std::vector<std::string> tokens;
    std::vector<bool> valid;

    std::size_t size() const { return tokens.size(); }
    std::size_t valid_count() const;
    void validate(const DumpHeader& header) const;

    bool operator==(const TokenTable&) const = default;
};

struct AttentionRecord {
    std::uint32_t step = 0;
    std::uint32_t layer = 0;
    std::vector<float> values;

    bool operator==(const AttentionRecord&) const = default;
};

/// Checks shape, finiteness, non-negativity and (for Joint layout, when
/// check_softmax is set) that every attention row sums to 1 within
/// kSoftmaxRowTolerance. Throws ShapeError or InvariantError.
void validate_record(const AttentionRecord& record, const DumpHeader& header, bool check_softmax = true);

/// Streaming writer. Records must arrive in (t-major, l-minor) order.
class DumpWriter {
public:
    DumpWriter(std::ostream& out, DumpHeader header, TokenTable tokens);

    void write(const AttentionRecord& record);
    /// Verifies all records were written; returns total bytes emitted.
    std::size_t finish();

    std::size_t bytes_written() const { return bytes_; }
    const DumpHeader& header() const { return header_; }

private:
    std::ostream* out_;
    DumpHeader header_;
    std::size_t next_index_ = 0;
    std::size_t bytes_ = 0;
    bool finished_ = false;
    std::vector<unsigned char> scratch_;
};

std::size_t write_dump(const DumpHeader& header, const TokenTable& tokens,
                       std::span<const AttentionRecord> records, std::ostream& out);
std::size_t write_dump_file(const DumpHeader& header, const TokenTable& tokens,
                            std::span<const AttentionRecord> records, const std::filesystem::path& path);

struct ReaderOptions {
    bool check_softmax = true;
    /// Upper bound on the bytes a single record may occupy; 0 disables the check.
    std::size_t memory_budget_bytes = 0;
};

/// Lazy reader: header and token table are parsed on construction, records
/// one at a time. Only one record's payload is ever resident.
class DumpReader {
public:
    explicit DumpReader(std::istream& in, ReaderOptions options = {});
    static DumpReader open(const std::filesystem::path& path, ReaderOptions options = {});

    DumpReader(DumpReader&&) noexcept = default;
    DumpReader& operator=(DumpReader&&) noexcept = default;

    const DumpHeader& header() const { return header_; }
    const TokenTable& tokens() const { return tokens_; }

    /// Reads the next record into `out`, reusing its storage. Returns false
    /// once every record has been consumed (and verifies no trailing bytes).
    bool next(AttentionRecord& out);
    std::optional<AttentionRecord> next();

    std::size_t records_read() const { return next_index_; }
    std::size_t bytes_read() const { return bytes_; }
    /// Largest payload buffer the reader has materialized so far.
    std::size_t peak_record_bytes() const { return peak_record_bytes_; }

private:
    DumpReader(std::unique_ptr<std::istream> owned, ReaderOptions options);
    void read_preamble();

    std::unique_ptr<std::istream> owned_;
    std::istream* in_ = nullptr;
    ReaderOptions options_;
    DumpHeader header_;
    TokenTable tokens_;
    std::size_t next_index_ = 0;
    std::size_t bytes_ = 0;
    std::size_t peak_record_bytes_ = 0;
};

struct DumpContents {
    DumpHeader header;
    TokenTable tokens;
    std::vector<AttentionRecord> records;
};

DumpContents read_all(DumpReader& reader);
DumpContents read_dump_file(const std::filesystem::path& path, ReaderOptions options = {});

struct DumpSummary {
    DumpHeader header;
    TokenTable tokens;
    std::size_t records = 0;
    std::size_t bytes = 0;
};

/// Full validation pass over a dump file without keeping records in memory.
DumpSummary validate_dump(const std::filesystem::path& path, ReaderOptions options = {});

}  // namespace attnmask
