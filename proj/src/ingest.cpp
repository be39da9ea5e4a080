#include "shotsearch/ingest.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <numbers>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>

#include "shotsearch/text.hpp"

namespace shotsearch {

namespace {

std::string at_line(std::size_t line)
{
    return "line " + std::to_string(line) + ": ";
}

std::vector<std::string_view> split_tabs(std::string_view line, std::size_t max_fields = 0)
{
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        if (max_fields && fields.size() + 1 == max_fields) {
            fields.push_back(line.substr(start));
            break;
        }
        auto tab = line.find('\t', start);
        if (tab == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
    return fields;
}

template <typename Int>
Int parse_uint(std::string_view field, std::size_t line, const char* what)
{
    Int value{};
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size()) {
        throw Error(ErrorKind::Parse, at_line(line) + "invalid " + what + " '" +
                                          std::string(field) + "'");
    }
    return value;
}

double parse_real(std::string_view field, std::size_t line, const char* what)
{
    double value{};
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size() ||
        !std::isfinite(value)) {
        throw Error(ErrorKind::Parse, at_line(line) + "invalid " + what + " '" +
                                          std::string(field) + "'");
    }
    return value;
}

std::string_view strip_cr(std::string_view line)
{
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
}

bool skip_line(std::string_view line)
{
    return line.empty() || line.front() == '#';
}

std::ifstream open_text(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    return in;
}

ShotId shot_of(std::string_view video, std::string_view index, std::size_t line)
{
    if (video.empty()) throw Error(ErrorKind::Parse, at_line(line) + "empty video_id");
    return ShotId{std::string(video), parse_uint<std::uint32_t>(index, line, "shot_index")};
}

void require_shot(const ShotTable& table, const ShotId& id, std::size_t line)
{
    if (!table.contains(id)) {
        throw Error(ErrorKind::UnknownShot, at_line(line) + "unknown shot " + id.str());
    }
}

// Little-endian cursor over an untrusted byte buffer.
class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    template <typename T>
    T read(const char* what)
    {
        need(sizeof(T), what);
        T value{};
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            value |= static_cast<T>(static_cast<T>(bytes_[pos_ + i]) << (8 * i));
        }
        pos_ += sizeof(T);
        return value;
    }

    void need(std::size_t n, const char* what) const
    {
        if (bytes_.size() - pos_ < n) {
            throw Error(ErrorKind::Format, std::string("truncated file while reading ") + what);
        }
    }

    std::size_t pos() const { return pos_; }
    std::span<const std::uint8_t> rest() const { return bytes_.subspan(pos_); }
    void skip(std::size_t n, const char* what)
    {
        need(n, what);
        pos_ += n;
    }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

template <typename T>
void put(std::vector<std::uint8_t>& out, T value)
{
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
    }
}

constexpr std::size_t kCodeRecordBytes = 4 + 4 + 1 + 8 + 32;

}  // namespace

ShotTable::ShotTable(std::vector<ShotRef> shots, std::vector<Keyframe> keyframes)
    : shots_(std::move(shots)), keyframes_(std::move(keyframes))
{
    auto report = validate_shot_table(shots_, keyframes_);
    if (!report.ok()) throw Error(ErrorKind::Validation, report.joined());
    for (std::size_t i = 0; i < shots_.size(); ++i) shot_index_.emplace(shots_[i].id, i);
    for (std::size_t i = 0; i < keyframes_.size(); ++i) {
        keyframe_index_.emplace(std::pair{keyframes_[i].shot, int{keyframes_[i].position}}, i);
    }
}

const ShotRef* ShotTable::find(const ShotId& id) const
{
    auto it = shot_index_.find(id);
    return it == shot_index_.end() ? nullptr : &shots_[it->second];
}

const Keyframe* ShotTable::find_keyframe(const ShotId& id, int position) const
{
    auto it = keyframe_index_.find({id, position});
    return it == keyframe_index_.end() ? nullptr : &keyframes_[it->second];
}

ShotTable parse_manifest(std::istream& in)
{
    std::vector<ShotRef> shots;
    std::vector<Keyframe> explicit_frames;
    std::set<ShotId> has_explicit;
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        auto text = strip_cr(raw);
        if (skip_line(text)) continue;
        auto f = split_tabs(text);
        if (f[0] == "K") {
            if (f.size() != 5) {
                throw Error(ErrorKind::Parse, at_line(line) + "keyframe line needs 5 fields, got " +
                                                  std::to_string(f.size()));
            }
            Keyframe kf{shot_of(f[1], f[2], line), parse_uint<std::uint8_t>(f[3], line, "position"),
                        parse_uint<std::uint64_t>(f[4], line, "frame_number")};
            has_explicit.insert(kf.shot);
            explicit_frames.push_back(std::move(kf));
            continue;
        }
        if (f.size() != 4) {
            throw Error(ErrorKind::Parse, at_line(line) + "shot line needs 4 fields, got " +
                                              std::to_string(f.size()));
        }
        shots.push_back(ShotRef{shot_of(f[0], f[1], line),
                                parse_uint<std::uint64_t>(f[2], line, "start_frame"),
                                parse_uint<std::uint64_t>(f[3], line, "end_frame")});
    }

    std::vector<Keyframe> keyframes = std::move(explicit_frames);
    for (const auto& shot : shots) {
        if (has_explicit.contains(shot.id) || shot.start_frame > shot.end_frame) continue;
        for (const auto& kf : derive_keyframes(shot)) keyframes.push_back(kf);
    }
    return ShotTable(std::move(shots), std::move(keyframes));
}

ShotTable load_manifest(const std::filesystem::path& path)
{
    auto in = open_text(path);
    return parse_manifest(in);
}

void write_manifest(std::ostream& out, const ShotTable& table)
{
    for (const auto& shot : table.shots()) {
        out << shot.id.video_id << '\t' << shot.id.shot_index << '\t' << shot.start_frame << '\t'
            << shot.end_frame << '\n';
    }
    for (const auto& kf : table.keyframes()) {
        out << "K\t" << kf.shot.video_id << '\t' << kf.shot.shot_index << '\t'
            << int{kf.position} << '\t' << kf.frame_number << '\n';
    }
}

std::vector<CodeRecord> parse_codes(std::span<const std::uint8_t> bytes, CodeSpace expected_space,
                                    const ShotTable& table)
{
    Reader r(bytes);
    r.need(4, "magic");
    if (std::memcmp(bytes.data(), "SHGC", 4) != 0) {
        throw Error(ErrorKind::Format, "bad magic: not a code file");
    }
    r.skip(4, "magic");
    auto version = r.read<std::uint16_t>("version");
    if (version != kCodeFileVersion) {
        throw Error(ErrorKind::Format, "unsupported code file version " + std::to_string(version));
    }
    auto space_byte = r.read<std::uint8_t>("space");
    if (space_byte > 1) {
        throw Error(ErrorKind::Format, "invalid code space byte " + std::to_string(space_byte));
    }
    auto space = static_cast<CodeSpace>(space_byte);
    if (space != expected_space) {
        throw Error(ErrorKind::Format, "code file holds " + std::string(to_string(space)) +
                                           " codes, expected " +
                                           std::string(to_string(expected_space)));
    }
    auto count = r.read<std::uint64_t>("record count");
    if (count > r.rest().size() / kCodeRecordBytes) {
        throw Error(ErrorKind::Format, "truncated file: " + std::to_string(count) +
                                           " records declared");
    }
    const std::size_t table_start = r.pos() + static_cast<std::size_t>(count) * kCodeRecordBytes;
    auto strings = bytes.subspan(table_start);

    std::unordered_map<std::uint32_t, std::string> video_at;
    auto video = [&](std::uint32_t offset) -> const std::string& {
        auto it = video_at.find(offset);
        if (it != video_at.end()) return it->second;
        Reader s(strings);
        s.skip(offset, "string table offset");
        auto length = s.read<std::uint32_t>("string length");
        s.need(length, "string bytes");
        std::string value(reinterpret_cast<const char*>(strings.data() + s.pos()), length);
        return video_at.emplace(offset, std::move(value)).first->second;
    };

    std::vector<CodeRecord> records;
    records.reserve(static_cast<std::size_t>(count));
    std::set<std::pair<ShotId, int>> seen;
    for (std::uint64_t i = 0; i < count; ++i) {
        auto offset = r.read<std::uint32_t>("video offset");
        auto shot_index = r.read<std::uint32_t>("shot index");
        auto position = r.read<std::uint8_t>("position");
        CodeRecord rec;
        rec.space = space;
        rec.code64.bits = r.read<std::uint64_t>("code64");
        for (auto& w : rec.code256.words) w = r.read<std::uint64_t>("code256");
        ShotId id{video(offset), shot_index};
        const Keyframe* kf = table.find_keyframe(id, position);
        if (!kf) {
            throw Error(ErrorKind::UnknownKeyframe, "record " + std::to_string(i) +
                                                        ": unknown keyframe " + id.str() + "/" +
                                                        std::to_string(position));
        }
        if (!seen.emplace(id, position).second) {
            throw Error(ErrorKind::Duplicate, "record " + std::to_string(i) +
                                                  ": duplicate keyframe " + id.str() + "/" +
                                                  std::to_string(position));
        }
        rec.keyframe = *kf;
        records.push_back(std::move(rec));
    }
    return records;
}

std::vector<CodeRecord> load_codes(const std::filesystem::path& path, CodeSpace expected_space,
                                   const ShotTable& table)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return parse_codes(bytes, expected_space, table);
}

std::vector<std::uint8_t> serialize_codes(std::span<const CodeRecord> records, CodeSpace space)
{
    std::vector<std::uint8_t> out;
    out.reserve(15 + records.size() * kCodeRecordBytes);
    for (char c : std::string_view("SHGC")) out.push_back(static_cast<std::uint8_t>(c));
    put<std::uint16_t>(out, kCodeFileVersion);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(space));
    put<std::uint64_t>(out, records.size());

    std::vector<std::uint8_t> strings;
    std::unordered_map<std::string, std::uint32_t> offsets;
    for (const auto& rec : records) {
        if (rec.space != space) {
            throw Error(ErrorKind::InvalidArgument, "record space does not match file space");
        }
        const auto& vid = rec.keyframe.shot.video_id;
        auto [it, inserted] = offsets.emplace(vid, static_cast<std::uint32_t>(strings.size()));
        if (inserted) {
            put<std::uint32_t>(strings, static_cast<std::uint32_t>(vid.size()));
            strings.insert(strings.end(), vid.begin(), vid.end());
        }
        put<std::uint32_t>(out, it->second);
        put<std::uint32_t>(out, rec.keyframe.shot.shot_index);
        put<std::uint8_t>(out, rec.keyframe.position);
        put<std::uint64_t>(out, rec.code64.bits);
        for (auto w : rec.code256.words) put<std::uint64_t>(out, w);
    }
    out.insert(out.end(), strings.begin(), strings.end());
    return out;
}

void write_codes(const std::filesystem::path& path, std::span<const CodeRecord> records,
                 CodeSpace space)
{
    auto bytes = serialize_codes(records, space);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

std::vector<AnnotationEntry> parse_annotations(std::istream& in, const ShotTable& table)
{
    std::vector<AnnotationEntry> entries;
    std::map<std::pair<ShotId, std::string>, std::size_t> first_line;
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        auto text = strip_cr(raw);
        if (skip_line(text)) continue;
        auto f = split_tabs(text);
        if (f.size() != 5) {
            throw Error(ErrorKind::Parse, at_line(line) + "annotation needs 5 fields, got " +
                                              std::to_string(f.size()));
        }
        AnnotationEntry e;
        e.shot = shot_of(f[0], f[1], line);
        try {
            e.kind = parse_annotation_kind(f[2]);
        } catch (const Error& err) {
            throw Error(ErrorKind::Parse, at_line(line) + err.what());
        }
        if (f[3].empty()) throw Error(ErrorKind::Parse, at_line(line) + "empty label");
        e.label = std::string(f[3]);
        e.probability = parse_real(f[4], line, "probability");
        if (e.probability < 0.0 || e.probability > 1.0) {
            throw Error(ErrorKind::OutOfRange, at_line(line) + "probability " +
                                                   std::string(f[4]) + " outside [0,1]");
        }
        require_shot(table, e.shot, line);
        auto [it, inserted] = first_line.emplace(std::pair{e.shot, e.label}, line);
        if (!inserted) {
            throw Error(ErrorKind::Duplicate, "duplicate annotation (" + e.shot.str() + ", " +
                                                  e.label + ") on lines " +
                                                  std::to_string(it->second) + " and " +
                                                  std::to_string(line));
        }
        entries.push_back(std::move(e));
    }
    return entries;
}

std::vector<AnnotationEntry> load_annotations(const std::filesystem::path& path,
                                              const ShotTable& table)
{
    auto in = open_text(path);
    return parse_annotations(in, table);
}

void write_annotations(std::ostream& out, std::span<const AnnotationEntry> entries)
{
    auto old_precision = out.precision(17);
    for (const auto& e : entries) {
        out << e.shot.video_id << '\t' << e.shot.shot_index << '\t' << to_string(e.kind) << '\t'
            << e.label << '\t' << e.probability << '\n';
    }
    out.precision(old_precision);
}

std::vector<TextOccurrence> parse_text(std::istream& in, const ShotTable& table)
{
    std::vector<TextOccurrence> out;
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        auto text = strip_cr(raw);
        if (skip_line(text)) continue;
        auto f = split_tabs(text, 4);
        if (f.size() != 4) {
            throw Error(ErrorKind::Parse, at_line(line) + "text record needs 4 fields, got " +
                                              std::to_string(f.size()));
        }
        ShotId shot = shot_of(f[0], f[1], line);
        auto frame = parse_uint<std::uint64_t>(f[2], line, "frame_number");
        require_shot(table, shot, line);
        std::vector<std::string> tokens;
        try {
            tokens = text::tokenize(f[3]);
        } catch (const Error& err) {
            throw Error(ErrorKind::Parse, at_line(line) + err.what());
        }
        if (tokens.empty()) {
            throw Error(ErrorKind::Parse, at_line(line) + "empty token after trimming");
        }
        for (auto& word : tokens) out.push_back(TextOccurrence{shot, frame, std::move(word)});
    }
    return out;
}

std::vector<TextOccurrence> load_text(const std::filesystem::path& path, const ShotTable& table)
{
    auto in = open_text(path);
    return parse_text(in, table);
}

void write_text(std::ostream& out, std::span<const TextOccurrence> occurrences)
{
    for (const auto& t : occurrences) {
        out << t.shot.video_id << '\t' << t.shot.shot_index << '\t' << t.frame_number << '\t'
            << t.word << '\n';
    }
}

HyperplaneEncoder::HyperplaneEncoder(std::uint64_t seed, std::size_t dimension)
    : seed_(seed), dimension_(dimension)
{
    if (dimension == 0) throw Error(ErrorKind::InvalidArgument, "encoder dimension must be > 0");
    std::mt19937_64 engine(seed);
    constexpr double kScale = 0x1.0p-53;
    auto gaussian = [&] {
        const double u1 = static_cast<double>((engine() >> 11) + 1) * kScale;
        const double u2 = static_cast<double>(engine() >> 11) * kScale;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    };
    planes64_.resize(64 * dimension);
    for (auto& x : planes64_) x = gaussian();
    planes256_.resize(256 * dimension);
    for (auto& x : planes256_) x = gaussian();
}

std::pair<Code64, Code256> HyperplaneEncoder::encode(const FeatureVector& v) const
{
    if (v.values.size() != dimension_) {
        throw Error(ErrorKind::DimensionMismatch,
                    "feature vector has dimension " + std::to_string(v.values.size()) +
                        ", encoder expects " + std::to_string(dimension_));
    }
    for (double x : v.values) {
        if (!std::isfinite(x)) throw Error(ErrorKind::InvalidArgument, "non-finite feature value");
    }
    auto sign_bit = [&](const std::vector<double>& planes, std::size_t b) {
        const double* row = planes.data() + b * dimension_;
        double dot = 0.0;
        for (std::size_t i = 0; i < dimension_; ++i) dot += row[i] * v.values[i];
        return dot >= 0.0 ? std::uint64_t{1} : std::uint64_t{0};
    };
    Code64 c64;
    for (std::size_t b = 0; b < 64; ++b) c64.bits |= sign_bit(planes64_, b) << b;
    Code256 c256;
    for (std::size_t b = 0; b < 256; ++b) c256.words[b / 64] |= sign_bit(planes256_, b) << (b % 64);
    return {c64, c256};
}

std::vector<KeyframeFeature> parse_features(std::istream& in, const ShotTable& table,
                                            std::size_t dimension)
{
    std::vector<KeyframeFeature> out;
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        auto text = strip_cr(raw);
        if (skip_line(text)) continue;
        auto f = split_tabs(text);
        if (f.size() != 4) {
            throw Error(ErrorKind::Parse, at_line(line) + "feature record needs 4 fields, got " +
                                              std::to_string(f.size()));
        }
        KeyframeFeature feat;
        feat.shot = shot_of(f[0], f[1], line);
        feat.position = parse_uint<std::uint8_t>(f[2], line, "position");
        std::string_view values = f[3];
        while (true) {
            auto comma = values.find(',');
            feat.vector.values.push_back(parse_real(values.substr(0, comma), line, "feature value"));
            if (comma == std::string_view::npos) break;
            values.remove_prefix(comma + 1);
        }
        if (feat.vector.values.size() != dimension) {
            throw Error(ErrorKind::DimensionMismatch,
                        at_line(line) + "feature dimension " +
                            std::to_string(feat.vector.values.size()) + " ≠ " +
                            std::to_string(dimension));
        }
        if (!table.find_keyframe(feat.shot, feat.position)) {
            throw Error(ErrorKind::UnknownKeyframe, at_line(line) + "unknown keyframe " +
                                                        feat.shot.str() + "/" +
                                                        std::to_string(feat.position));
        }
        out.push_back(std::move(feat));
    }
    return out;
}

std::vector<KeyframeFeature> load_features(const std::filesystem::path& path,
                                           const ShotTable& table, std::size_t dimension)
{
    auto in = open_text(path);
    return parse_features(in, table, dimension);
}

std::vector<CodeRecord> encode_features(const HyperplaneEncoder& encoder,
                                        std::span<const KeyframeFeature> features,
                                        CodeSpace space, const ShotTable& table)
{
    std::vector<CodeRecord> out;
    out.reserve(features.size());
    for (const auto& f : features) {
        const Keyframe* kf = table.find_keyframe(f.shot, f.position);
        if (!kf) {
            throw Error(ErrorKind::UnknownKeyframe,
                        "unknown keyframe " + f.shot.str() + "/" + std::to_string(f.position));
        }
        auto [c64, c256] = encoder.encode(f.vector);
        out.push_back(CodeRecord{*kf, space, c64, c256});
    }
    return out;
}

}  // namespace shotsearch
