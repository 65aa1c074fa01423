#include "volherd/io.hpp"

#include <array>
#include <charconv>
#include <cstdio>
#include <stdexcept>
#include <system_error>

namespace volherd {

namespace {

constexpr std::string_view kEventsHeader = "# columns: t traded V N Q r\n";
constexpr char kCheckpointMagic[4] = {'V', 'H', 'C', 'K'};
constexpr uint32_t kCheckpointVersion = 1;

void append_u64(std::string& line, uint64_t v) {
    std::array<char, 24> buf;
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    line.append(buf.data(), res.ptr);
}

void append_double(std::string& line, double v) {
    std::array<char, 40> buf;
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    line.append(buf.data(), res.ptr);
}

// from_chars over a space-delimited field; advances p past the field.
template <typename T>
T parse_field(const char*& p, const char* end, const char* what) {
    while (p != end && *p == ' ') ++p;
    T value{};
    auto res = std::from_chars(p, end, value);
    if (res.ec != std::errc())
        throw std::runtime_error(std::string("events file: bad ") + what);
    p = res.ptr;
    return value;
}

}  // namespace

EventWriter::EventWriter(const std::filesystem::path& file) {
    out_.open(file, std::ios::binary | std::ios::trunc);
    if (!out_) throw std::runtime_error("cannot open events file for writing: " +
                                        file.string());
    out_ << kEventsHeader;
    offset_ = kEventsHeader.size();
}

EventWriter::EventWriter(const std::filesystem::path& file,
                         uint64_t resume_offset) {
    std::error_code ec;
    const auto size = std::filesystem::file_size(file, ec);
    if (ec)
        throw std::runtime_error("cannot stat events file: " + file.string());
    if (size < resume_offset)
        throw std::runtime_error(
            "events file shorter than checkpoint offset: " + file.string());
    if (resume_offset < kEventsHeader.size())
        throw std::runtime_error("resume offset inside events header");
    std::filesystem::resize_file(file, resume_offset, ec);
    if (ec)
        throw std::runtime_error("cannot truncate events file: " +
                                 file.string());
    out_.open(file, std::ios::binary | std::ios::app);
    if (!out_)
        throw std::runtime_error("cannot reopen events file: " + file.string());
    offset_ = resume_offset;
}

void EventWriter::append(const EventRecord& rec) {
    std::string line;
    line.reserve(96);
    append_u64(line, rec.t);
    line.push_back(' ');
    line.push_back(rec.traded ? '1' : '0');
    line.push_back(' ');
    append_double(line, rec.V);
    line.push_back(' ');
    append_u64(line, rec.N);
    line.push_back(' ');
    append_double(line, rec.Q);
    line.push_back(' ');
    append_double(line, rec.r);
    line.push_back('\n');
    out_.write(line.data(), static_cast<std::streamsize>(line.size()));
    if (!out_) throw std::runtime_error("events file write failed");
    offset_ += line.size();
}

void EventWriter::flush() {
    out_.flush();
    if (!out_) throw std::runtime_error("events file flush failed");
}

std::vector<EventRecord> read_events(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open events file: " +
                                      file.string());
    std::string line;
    if (!std::getline(in, line) ||
        line + "\n" != std::string(kEventsHeader))
        throw std::runtime_error("events file: missing or wrong header");
    std::vector<EventRecord> out;
    while (std::getline(in, line)) {
        const char* p = line.data();
        const char* end = line.data() + line.size();
        EventRecord rec;
        rec.t = parse_field<uint64_t>(p, end, "t");
        const auto traded = parse_field<uint32_t>(p, end, "traded flag");
        if (traded > 1)
            throw std::runtime_error("events file: traded flag not 0/1");
        rec.traded = traded == 1;
        rec.V = parse_field<double>(p, end, "V");
        rec.N = parse_field<uint32_t>(p, end, "N");
        rec.Q = parse_field<double>(p, end, "Q");
        rec.r = parse_field<double>(p, end, "r");
        while (p != end && *p == ' ') ++p;
        if (p != end)
            throw std::runtime_error("events file: trailing junk on row");
        out.push_back(rec);
    }
    return out;
}

void write_xy(const std::filesystem::path& file, std::string_view header,
              std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size())
        throw std::invalid_argument("write_xy: column length mismatch");
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " +
                                       file.string());
    out << "# " << header << "\n";
    std::string line;
    for (size_t i = 0; i < x.size(); ++i) {
        line.clear();
        append_double(line, x[i]);
        line.push_back(' ');
        append_double(line, y[i]);
        line.push_back('\n');
        out.write(line.data(), static_cast<std::streamsize>(line.size()));
    }
    if (!out) throw std::runtime_error("write failed: " + file.string());
}

void write_keyvalue(
    const std::filesystem::path& file,
    const std::vector<std::pair<std::string, std::string>>& rows) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " +
                                       file.string());
    for (const auto& [key, value] : rows) out << key << " = " << value << "\n";
    if (!out) throw std::runtime_error("write failed: " + file.string());
}

void write_text_file(const std::filesystem::path& file,
                     std::string_view content) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " +
                                       file.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed: " + file.string());
}

std::string read_text_file(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + file.string());
    std::string content((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
    if (in.bad()) throw std::runtime_error("read failed: " + file.string());
    return content;
}

namespace {

void put_u32(std::ofstream& out, uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_u64(std::ofstream& out, uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

uint32_t get_u32(std::ifstream& in) {
    uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}

uint64_t get_u64(std::ifstream& in) {
    uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}

std::string get_blob(std::ifstream& in, uint64_t len, const char* what) {
    if (len > (1ull << 31))
        throw std::runtime_error(std::string("checkpoint: oversized ") + what);
    std::string blob(static_cast<size_t>(len), '\0');
    in.read(blob.data(), static_cast<std::streamsize>(len));
    if (!in)
        throw std::runtime_error(std::string("checkpoint: truncated ") + what);
    return blob;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& file, const Checkpoint& ck) {
    const auto tmp = std::filesystem::path(file.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw std::runtime_error("cannot open checkpoint for writing: " +
                                     tmp.string());
        out.write(kCheckpointMagic, sizeof kCheckpointMagic);
        put_u32(out, kCheckpointVersion);
        put_u64(out, ck.identity_json.size());
        out.write(ck.identity_json.data(),
                  static_cast<std::streamsize>(ck.identity_json.size()));
        put_u64(out, ck.measure_done);
        put_u64(out, ck.events_offset);
        put_u64(out, ck.market_blob.size());
        out.write(ck.market_blob.data(),
                  static_cast<std::streamsize>(ck.market_blob.size()));
        out.flush();
        if (!out)
            throw std::runtime_error("checkpoint write failed: " +
                                     tmp.string());
    }
    std::filesystem::rename(tmp, file);
}

Checkpoint load_checkpoint(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " +
                                      file.string());
    char magic[4] = {};
    in.read(magic, sizeof magic);
    if (!in || std::string_view(magic, 4) != std::string_view(kCheckpointMagic, 4))
        throw std::runtime_error("not a checkpoint file: " + file.string());
    const uint32_t version = get_u32(in);
    if (version != kCheckpointVersion)
        throw std::runtime_error("unsupported checkpoint version");
    Checkpoint ck;
    ck.identity_json = get_blob(in, get_u64(in), "identity");
    ck.measure_done = get_u64(in);
    ck.events_offset = get_u64(in);
    if (!in) throw std::runtime_error("checkpoint: truncated counters");
    ck.market_blob = get_blob(in, get_u64(in), "market snapshot");
    return ck;
}

}  // namespace volherd
