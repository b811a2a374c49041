#include "forge/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <openssl/evp.h>

namespace forge {

namespace {

constexpr char kMagic[8] = {'F', 'O', 'R', 'G', 'E', 'C', 'K', 'P'};
constexpr std::size_t kDigestBytes = 32;

class Writer {
public:
    void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
    void u32(std::uint32_t v) { le(v); }
    void u64(std::uint64_t v) { le(v); }
    void i64(std::int64_t v) { le(static_cast<std::uint64_t>(v)); }
    void f64(double v) { le(std::bit_cast<std::uint64_t>(v)); }
    void str(const std::string& s) {
        u64(s.size());
        out_ += s;
    }
    void doubles(const double* p, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) f64(p[i]);
    }
    std::string& data() { return out_; }

private:
    template <typename U>
    void le(U v) {
        for (std::size_t i = 0; i < sizeof(U); ++i) out_ += static_cast<char>((v >> (8 * i)) & 0xff);
    }
    std::string out_;
};

class Reader {
public:
    Reader(const std::string& in, std::size_t end, std::string source) : in_(in), end_(end), source_(std::move(source)) {}
    void need(std::size_t n, const char* what) {
        if (end_ - pos_ < n) fail(std::string("truncated while reading ") + what);
    }
    std::uint32_t u32(const char* what) { return le<std::uint32_t>(what); }
    std::uint64_t u64(const char* what) { return le<std::uint64_t>(what); }
    std::int64_t i64(const char* what) { return static_cast<std::int64_t>(le<std::uint64_t>(what)); }
    double f64(const char* what) { return std::bit_cast<double>(le<std::uint64_t>(what)); }
    std::string str(const char* what) {
        const std::uint64_t n = u64(what);
        need(n, what);
        std::string s = in_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    void doubles(double* p, std::uint64_t n, const char* what) {
        if (n > (end_ - pos_) / 8) fail(std::string("truncated while reading ") + what);
        for (std::uint64_t i = 0; i < n; ++i) p[i] = f64(what);
    }
    std::size_t pos() const { return pos_; }
    void skip(std::size_t n) { pos_ += n; }
    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(source_ + ": checkpoint byte " + std::to_string(pos_) + ": " + msg);
    }

private:
    template <typename U>
    U le(const char* what) {
        need(sizeof(U), what);
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
        pos_ += sizeof(U);
        return v;
    }
    const std::string& in_;
    std::size_t end_;
    std::size_t pos_ = 0;
    std::string source_;
};

std::string sha256_raw(const char* p, std::size_t n) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(p, n, digest, &len, EVP_sha256(), nullptr);
    return std::string(reinterpret_cast<const char*>(digest), len);
}

void write_adam(Writer& w, const AdamState& a) {
    w.i64(a.step);
    w.u64(a.m.size());
    w.doubles(a.m.data(), a.m.size());
    w.doubles(a.v.data(), a.v.size());
}

AdamState read_adam(Reader& r) {
    AdamState a;
    a.step = r.i64("adam step");
    const std::uint64_t n = r.u64("adam size");
    if (n > (1ull << 40)) r.fail("implausible moment count");
    a.m.resize(n);
    a.v.resize(n);
    r.doubles(a.m.data(), n, "adam first moment");
    r.doubles(a.v.data(), n, "adam second moment");
    return a;
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& c) {
    Writer w;
    w.bytes(kMagic, sizeof kMagic);
    w.u32(kCheckpointVersion);
    w.str(c.config_text);
    w.str(c.base_dir);
    const TrainState& s = c.state;
    w.u32(static_cast<std::uint32_t>(s.stage));
    w.i64(s.iteration);
    w.i64(s.skipped);
    w.str(s.rng.serialize());
    w.u64(s.avatar.rng_seed);
    w.u64(static_cast<std::uint64_t>(s.avatar.psi_v.rows()));
    w.doubles(s.avatar.psi_v.data(), static_cast<std::size_t>(s.avatar.psi_v.size()));
    w.u32(static_cast<std::uint32_t>(s.avatar.psi_a.width));
    w.u32(static_cast<std::uint32_t>(s.avatar.psi_a.height));
    w.doubles(s.avatar.psi_a.data.data(), s.avatar.psi_a.data.size());
    write_adam(w, s.adam_v);
    write_adam(w, s.adam_a);
    std::string& out = w.data();
    out += sha256_raw(out.data(), out.size());
    return out;
}

Checkpoint decode_checkpoint(const std::string& bytes, const std::string& source) {
    if (bytes.size() < sizeof kMagic + 4 + kDigestBytes || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
        throw ParseError(source + ": not a forge checkpoint (bad magic)");
    const std::size_t body_end = bytes.size() - kDigestBytes;
    Reader r(bytes, body_end, source);
    r.skip(sizeof kMagic);
    const std::uint32_t version = r.u32("version");
    if (version != kCheckpointVersion)
        r.fail("unsupported checkpoint version " + std::to_string(version) + " (expected " +
               std::to_string(kCheckpointVersion) + ")");
    if (sha256_raw(bytes.data(), body_end) != bytes.substr(body_end))
        throw ParseError(source + ": checkpoint digest mismatch (file corrupted or truncated)");

    Checkpoint c;
    c.config_text = r.str("config text");
    c.base_dir = r.str("base directory");
    TrainState& s = c.state;
    const std::uint32_t stage = r.u32("stage");
    if (stage > static_cast<std::uint32_t>(Stage::done)) r.fail("invalid stage id " + std::to_string(stage));
    s.stage = static_cast<Stage>(stage);
    s.iteration = r.i64("iteration");
    s.skipped = r.i64("skipped");
    try {
        s.rng = Rng::deserialize(r.str("rng state"));
    } catch (const std::exception& e) {
        r.fail(std::string("invalid rng state: ") + e.what());
    }
    s.avatar.rng_seed = r.u64("seed");
    const std::uint64_t n = r.u64("vertex count");
    if (n > (1ull << 32)) r.fail("implausible vertex count");
    s.avatar.psi_v.resize(static_cast<Eigen::Index>(n), 3);
    r.doubles(s.avatar.psi_v.data(), 3 * n, "offsets");
    const std::uint32_t w = r.u32("albedo width");
    const std::uint32_t h = r.u32("albedo height");
    if (static_cast<std::uint64_t>(w) * h > (1ull << 32)) r.fail("implausible albedo size");
    s.avatar.psi_a = Image(static_cast<int>(w), static_cast<int>(h));
    r.doubles(s.avatar.psi_a.data.data(), s.avatar.psi_a.data.size(), "albedo");
    s.adam_v = read_adam(r);
    s.adam_a = read_adam(r);
    if (r.pos() != body_end) r.fail("trailing bytes after checkpoint body");
    return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
    const std::string bytes = encode_checkpoint(checkpoint);
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw IoError("failed writing " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string() + ": cannot open checkpoint");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes, path.string());
}

}  // namespace forge
