#include "attnmask/dump_format.hpp"

#include "attnmask/error.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

namespace attnmask {

namespace {

static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

// Token strings longer than this are treated as corruption rather than data.
constexpr std::uint32_t kMaxTokenBytes = 1u << 16;

void put_u32(std::vector<unsigned char>& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(const unsigned char* p) {
    return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
           (std::uint32_t{p[3]} << 24);
}

void encode_floats(std::span<const float> values, std::vector<unsigned char>& out) {
    const std::size_t base = out.size();
    out.resize(base + values.size() * 4);
    if constexpr (std::endian::native == std::endian::little) {
        std::memcpy(out.data() + base, values.data(), values.size() * 4);
    } else {
        for (std::size_t i = 0; i < values.size(); ++i) {
            const auto bits = std::bit_cast<std::uint32_t>(values[i]);
            for (int b = 0; b < 4; ++b) out[base + 4 * i + b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xFFu);
        }
    }
}

void decode_floats_in_place(std::vector<float>& values) {
    if constexpr (std::endian::native != std::endian::little) {
        for (auto& v : values) {
            auto bits = std::bit_cast<std::uint32_t>(v);
            bits = ((bits & 0xFFu) << 24) | ((bits & 0xFF00u) << 8) | ((bits >> 8) & 0xFF00u) | (bits >> 24);
            v = std::bit_cast<float>(bits);
        }
    }
}

std::string record_name(std::size_t step, std::size_t layer) {
    return "(t=" + std::to_string(step) + ", l=" + std::to_string(layer) + ")";
}

}  // namespace

const char* to_string(Layout layout) {
    switch (layout) {
        case Layout::Joint: return "joint";
        case Layout::CrossOnly: return "cross-only";
    }
    return "unknown";
}

std::size_t DumpHeader::record_values() const {
    if (layout == Layout::Joint) return sequence_length() * sequence_length() * heads;
    return std::size_t{num_tokens} * latent_pixels() * heads;
}

void DumpHeader::validate() const {
    if (version != kDumpVersion) throw ConfigError("unsupported ATND version " + std::to_string(version));
    if (dtype != DType::Float32LE) throw ConfigError("unsupported ATND dtype");
    if (layout != Layout::Joint && layout != Layout::CrossOnly) throw ConfigError("unknown ATND layout");
    if (steps == 0 || layers == 0 || num_tokens == 0 || height == 0 || width == 0 || heads == 0)
        throw ConfigError("ATND header dimensions must all be >= 1");
}

std::size_t TokenTable::valid_count() const {
    std::size_t n = 0;
    for (bool v : valid) n += v ? 1 : 0;
    return n;
}

void TokenTable::validate(const DumpHeader& header) const {
    if (tokens.size() != header.num_tokens)
        throw ShapeError("token table has " + std::to_string(tokens.size()) + " entries, header expects " +
                         std::to_string(header.num_tokens));
    if (valid.size() != tokens.size()) throw ShapeError("valid mask length differs from token count");
    for (const auto& t : tokens)
        if (t.size() > kMaxTokenBytes) throw ShapeError("token string exceeds 64 KiB");
    if (valid_count() == 0) throw InvariantError("token table has no valid tokens");
}

void validate_record(const AttentionRecord& record, const DumpHeader& header, bool check_softmax) {
    const std::string where = record_name(record.step, record.layer);
    if (record.step >= header.steps || record.layer >= header.layers)
        throw ShapeError("record index " + where + " outside header range");
    if (record.values.size() != header.record_values())
        throw ShapeError("record " + where + " has " + std::to_string(record.values.size()) +
                         " values, header expects " + std::to_string(header.record_values()));
    for (float v : record.values) {
        if (!std::isfinite(v)) throw InvariantError("record " + where + " contains a non-finite value");
        if (v < 0.0f) throw InvariantError("record " + where + " contains a negative value");
    }
    if (!check_softmax || header.layout != Layout::Joint) return;

    const std::size_t seq = header.sequence_length();
    const std::size_t heads = header.heads;
    std::vector<double> sums(heads);
    for (std::size_t q = 0; q < seq; ++q) {
        std::fill(sums.begin(), sums.end(), 0.0);
        const float* row = record.values.data() + q * seq * heads;
        for (std::size_t k = 0; k < seq; ++k)
            for (std::size_t h = 0; h < heads; ++h) sums[h] += row[k * heads + h];
        for (std::size_t h = 0; h < heads; ++h) {
            if (std::abs(sums[h] - 1.0) > kSoftmaxRowTolerance)
                throw InvariantError("record " + where + ": attention row (query " + std::to_string(q) + ", head " +
                                     std::to_string(h) + ") sums to " + std::to_string(sums[h]) +
                                     ", softmax rows must sum to 1");
        }
    }
}

// ---------------------------------------------------------------- writer

DumpWriter::DumpWriter(std::ostream& out, DumpHeader header, TokenTable tokens)
    : out_(&out), header_(header) {
    header_.validate();
    tokens.validate(header_);

    std::vector<unsigned char> buf;
    buf.insert(buf.end(), kDumpMagic, kDumpMagic + 4);
    put_u32(buf, header_.version);
    buf.push_back(static_cast<unsigned char>(header_.layout));
    buf.push_back(static_cast<unsigned char>(header_.dtype));
    buf.push_back(header_.text_first ? 1 : 0);
    buf.push_back(0);
    for (std::uint32_t v : {header_.steps, header_.layers, header_.num_tokens, header_.height, header_.width,
                            header_.heads})
        put_u32(buf, v);
    for (const auto& tok : tokens.tokens) {
        put_u32(buf, static_cast<std::uint32_t>(tok.size()));
        buf.insert(buf.end(), tok.begin(), tok.end());
    }
    for (bool v : tokens.valid) buf.push_back(v ? 1 : 0);

    out_->write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!*out_) throw IoError("failed writing ATND header");
    bytes_ += buf.size();
}

void DumpWriter::write(const AttentionRecord& record) {
    if (finished_) throw ConfigError("DumpWriter::write after finish");
    if (next_index_ >= header_.record_count())
        throw ShapeError("extra record " + record_name(record.step, record.layer) + ": all " +
                         std::to_string(header_.record_count()) + " records already written");
    const std::size_t t = next_index_ / header_.layers;
    const std::size_t l = next_index_ % header_.layers;
    if (record.step != t || record.layer != l) {
        const bool seen = std::size_t{record.step} * header_.layers + record.layer < next_index_;
        throw ShapeError(std::string(seen ? "duplicate" : "out-of-order") + " record " +
                         record_name(record.step, record.layer) + ", expected " + record_name(t, l));
    }
    validate_record(record, header_, /*check_softmax=*/false);

    scratch_.clear();
    put_u32(scratch_, record.step);
    put_u32(scratch_, record.layer);
    encode_floats(record.values, scratch_);
    out_->write(reinterpret_cast<const char*>(scratch_.data()), static_cast<std::streamsize>(scratch_.size()));
    if (!*out_) throw IoError("failed writing record " + record_name(t, l));
    bytes_ += scratch_.size();
    ++next_index_;
}

std::size_t DumpWriter::finish() {
    if (!finished_) {
        if (next_index_ != header_.record_count()) {
            const std::size_t t = next_index_ / header_.layers;
            const std::size_t l = next_index_ % header_.layers;
            throw ShapeError("missing record " + record_name(t, l) + ": wrote " + std::to_string(next_index_) +
                             " of " + std::to_string(header_.record_count()));
        }
        out_->flush();
        if (!*out_) throw IoError("failed flushing ATND stream");
        finished_ = true;
    }
    return bytes_;
}

std::size_t write_dump(const DumpHeader& header, const TokenTable& tokens, std::span<const AttentionRecord> records,
                       std::ostream& out) {
    DumpWriter writer(out, header, tokens);
    for (const auto& r : records) writer.write(r);
    return writer.finish();
}

std::size_t write_dump_file(const DumpHeader& header, const TokenTable& tokens,
                            std::span<const AttentionRecord> records, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    return write_dump(header, tokens, records, out);
}

// ---------------------------------------------------------------- reader

DumpReader::DumpReader(std::istream& in, ReaderOptions options) : in_(&in), options_(options) { read_preamble(); }

DumpReader::DumpReader(std::unique_ptr<std::istream> owned, ReaderOptions options)
    : owned_(std::move(owned)), in_(owned_.get()), options_(options) {
    read_preamble();
}

DumpReader DumpReader::open(const std::filesystem::path& path, ReaderOptions options) {
    auto file = std::make_unique<std::ifstream>(path, std::ios::binary);
    if (!*file) throw IoError("cannot open dump " + path.string());
    return DumpReader(std::move(file), options);
}

void DumpReader::read_preamble() {
    unsigned char fixed[36];
    in_->read(reinterpret_cast<char*>(fixed), sizeof fixed);
    const auto got = static_cast<std::size_t>(in_->gcount());
    if (got < 4 || std::memcmp(fixed, kDumpMagic, 4) != 0) throw FormatError("bad magic: not an ATND dump");
    if (got < 8) throw FormatError("truncated ATND header");
    header_.version = get_u32(fixed + 4);
    if (header_.version != kDumpVersion)
        throw FormatError("unsupported ATND version " + std::to_string(header_.version));
    if (got < sizeof fixed) throw FormatError("truncated ATND header");
    if (fixed[8] > 1) throw FormatError("unknown layout code " + std::to_string(fixed[8]));
    if (fixed[9] != 0) throw FormatError("unsupported dtype code " + std::to_string(fixed[9]));
    if (fixed[10] > 1) throw FormatError("bad text_first flag");
    header_.layout = static_cast<Layout>(fixed[8]);
    header_.dtype = DType::Float32LE;
    header_.text_first = fixed[10] != 0;
    header_.steps = get_u32(fixed + 12);
    header_.layers = get_u32(fixed + 16);
    header_.num_tokens = get_u32(fixed + 20);
    header_.height = get_u32(fixed + 24);
    header_.width = get_u32(fixed + 28);
    header_.heads = get_u32(fixed + 32);
    try {
        header_.validate();
    } catch (const ConfigError& e) {
        throw FormatError(e.what());
    }
    bytes_ = sizeof fixed;

    tokens_.tokens.reserve(header_.num_tokens);
    for (std::uint32_t i = 0; i < header_.num_tokens; ++i) {
        unsigned char len_buf[4];
        in_->read(reinterpret_cast<char*>(len_buf), 4);
        if (in_->gcount() != 4) throw FormatError("truncated token table at token " + std::to_string(i));
        const std::uint32_t len = get_u32(len_buf);
        if (len > kMaxTokenBytes) throw FormatError("token " + std::to_string(i) + " length is implausible");
        std::string tok(len, '\0');
        in_->read(tok.data(), len);
        if (static_cast<std::uint32_t>(in_->gcount()) != len)
            throw FormatError("truncated token table at token " + std::to_string(i));
        tokens_.tokens.push_back(std::move(tok));
        bytes_ += 4 + len;
    }
    std::vector<char> mask(header_.num_tokens);
    in_->read(mask.data(), static_cast<std::streamsize>(mask.size()));
    if (static_cast<std::size_t>(in_->gcount()) != mask.size()) throw FormatError("truncated valid mask");
    bytes_ += mask.size();
    tokens_.valid.reserve(mask.size());
    for (char c : mask) {
        if (c != 0 && c != 1) throw FormatError("valid mask entries must be 0 or 1");
        tokens_.valid.push_back(c == 1);
    }
    try {
        tokens_.validate(header_);
    } catch (const ShapeError& e) {
        throw FormatError(e.what());
    }
}

bool DumpReader::next(AttentionRecord& out) {
    if (next_index_ == header_.record_count()) {
        if (in_->peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after final record");
        return false;
    }
    const std::size_t t = next_index_ / header_.layers;
    const std::size_t l = next_index_ % header_.layers;
    const std::size_t count = header_.record_values();
    const std::size_t payload_bytes = count * 4;
    if (options_.memory_budget_bytes != 0 && payload_bytes > options_.memory_budget_bytes)
        throw ConfigError("record " + record_name(t, l) + " needs " + std::to_string(payload_bytes) +
                          " bytes, above the reader memory budget of " +
                          std::to_string(options_.memory_budget_bytes));

    unsigned char idx[8];
    in_->read(reinterpret_cast<char*>(idx), 8);
    if (in_->gcount() != 8) throw FormatError("truncated payload in record " + record_name(t, l));
    const std::uint32_t step = get_u32(idx);
    const std::uint32_t layer = get_u32(idx + 4);
    if (step != t || layer != l)
        throw FormatError("record " + record_name(step, layer) + " found where " + record_name(t, l) +
                          " was expected (duplicate, missing or out of order)");

    out.step = step;
    out.layer = layer;
    out.values.resize(count);
    in_->read(reinterpret_cast<char*>(out.values.data()), static_cast<std::streamsize>(payload_bytes));
    if (static_cast<std::size_t>(in_->gcount()) != payload_bytes)
        throw FormatError("truncated payload in record " + record_name(t, l));
    decode_floats_in_place(out.values);
    peak_record_bytes_ = std::max(peak_record_bytes_, out.values.capacity() * sizeof(float));
    bytes_ += 8 + payload_bytes;

    validate_record(out, header_, options_.check_softmax);
    ++next_index_;
    return true;
}

std::optional<AttentionRecord> DumpReader::next() {
    AttentionRecord r;
    if (!next(r)) return std::nullopt;
    return r;
}

DumpContents read_all(DumpReader& reader) {
    DumpContents c{reader.header(), reader.tokens(), {}};
    c.records.reserve(c.header.record_count());
    AttentionRecord r;
    while (reader.next(r)) c.records.push_back(r);
    return c;
}

DumpContents read_dump_file(const std::filesystem::path& path, ReaderOptions options) {
    auto reader = DumpReader::open(path, options);
    return read_all(reader);
}

DumpSummary validate_dump(const std::filesystem::path& path, ReaderOptions options) {
    auto reader = DumpReader::open(path, options);
    AttentionRecord r;
    while (reader.next(r)) {
    }
    return DumpSummary{reader.header(), reader.tokens(), reader.records_read(), reader.bytes_read()};
}

}  // namespace attnmask
