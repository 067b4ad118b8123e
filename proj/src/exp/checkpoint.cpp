#include "feddtg/exp/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "json.hpp"

#include "feddtg/data/idx.hpp"
#include "feddtg/error.hpp"

namespace feddtg::exp {

struct CheckpointAccess {
    static fed::ServerState& server(Experiment& e) { return e.server_; }
    static std::vector<gan::TripletState>& clients(Experiment& e) { return e.clients_; }
    static fed::CommLedger& ledger(Experiment& e) { return e.ledger_; }
    static MetricsSeries& metrics(Experiment& e) { return e.metrics_; }
    static std::vector<fed::RoundRecord>& rounds(Experiment& e) { return e.rounds_; }
};

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint encoding assumes a little-endian host");

std::uint64_t fnv1a(const char* p, std::size_t n) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= static_cast<unsigned char>(p[i]);
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t shard_digest(const std::vector<data::Shard>& shards) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& s : shards) {
        h = derive_seed(h, static_cast<std::uint64_t>(s.client_id), s.indices.size());
        for (auto i : s.indices) h = splitmix64(h ^ i);
    }
    return h;
}

class Writer {
public:
    template <typename T>
    void pod(T v) {
        static_assert(std::is_trivially_copyable_v<T>);
        const char* p = reinterpret_cast<const char*>(&v);
        buf_.append(p, sizeof(T));
    }
    void u64(std::uint64_t v) { pod(v); }
    void i32(int v) { pod(static_cast<std::int32_t>(v)); }
    void f64(double v) { pod(v); }
    void flag(bool b) { pod(static_cast<std::uint8_t>(b ? 1 : 0)); }
    void str(const std::string& s) {
        u64(s.size());
        buf_.append(s);
    }
    void doubles(const std::vector<double>& v) {
        u64(v.size());
        buf_.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
    }
    void ints(const std::vector<int>& v) {
        u64(v.size());
        for (int x : v) i32(x);
    }
    void raw(const char* p, std::size_t n) { buf_.append(p, n); }
    std::string& buffer() { return buf_; }

private:
    std::string buf_;
};

class Reader {
public:
    Reader(const char* p, std::size_t n) : p_(p), end_(p + n) {}

    template <typename T>
    T pod() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, p_, sizeof(T));
        p_ += sizeof(T);
        return v;
    }
    std::uint64_t u64() { return pod<std::uint64_t>(); }
    int i32() { return pod<std::int32_t>(); }
    double f64() { return pod<double>(); }
    bool flag() {
        auto b = pod<std::uint8_t>();
        if (b > 1) throw FormatError("checkpoint: bad boolean byte");
        return b == 1;
    }
    std::size_t count(std::size_t elem_size) {
        auto n = u64();
        if (elem_size > 0 && n > static_cast<std::uint64_t>(end_ - p_) / elem_size)
            throw LengthError("checkpoint array", static_cast<std::size_t>(n) * elem_size, static_cast<std::size_t>(end_ - p_));
        return static_cast<std::size_t>(n);
    }
    std::string str() {
        auto n = count(1);
        std::string s(p_, n);
        p_ += n;
        return s;
    }
    std::vector<double> doubles() {
        auto n = count(sizeof(double));
        std::vector<double> v(n);
        std::memcpy(v.data(), p_, n * sizeof(double));
        p_ += n * sizeof(double);
        return v;
    }
    std::vector<int> ints() {
        auto n = count(sizeof(std::int32_t));
        std::vector<int> v(n);
        for (auto& x : v) x = i32();
        return v;
    }
    bool done() const { return p_ == end_; }

private:
    void need(std::size_t n) const {
        if (static_cast<std::size_t>(end_ - p_) < n) throw LengthError("checkpoint payload", n, static_cast<std::size_t>(end_ - p_));
    }
    const char* p_;
    const char* end_;
};

void put_totals(Writer& w, const fed::LedgerTotals& t) {
    for (auto v : t.values()) w.u64(v);
}

fed::LedgerTotals get_totals(Reader& r) {
    std::array<std::uint64_t, fed::LedgerTotals::kFieldCount> v{};
    for (auto& x : v) x = r.u64();
    return {v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9]};
}

void put_summary(Writer& w, const ClientSummary& s) {
    w.f64(s.mean);
    w.f64(s.min);
    w.f64(s.max);
    w.f64(s.stddev);
    w.doubles(s.values);
}

ClientSummary get_summary(Reader& r) {
    ClientSummary s;
    s.mean = r.f64();
    s.min = r.f64();
    s.max = r.f64();
    s.stddev = r.f64();
    s.values = r.doubles();
    return s;
}

void put_opt(Writer& w, const nn::OptimizerState& o) {
    w.u64(o.step);
    w.doubles(o.m);
    w.doubles(o.v);
}

void get_opt(Reader& r, nn::OptimizerState& o) {
    o.step = r.u64();
    auto m = r.doubles();
    auto v = r.doubles();
    if (m.size() != o.m.size() || v.size() != o.v.size())
        throw FormatError("checkpoint: optimizer moment size does not match the architecture");
    o.m = std::move(m);
    o.v = std::move(v);
}

void get_params(Reader& r, nn::ParamVector& p, const char* what) {
    auto v = r.doubles();
    if (v.size() != p.values.size())
        throw DimensionError(std::string("checkpoint: ") + what + " parameter count", p.values.size(), v.size());
    p.values = std::move(v);
}

}  // namespace

std::string encode_checkpoint(const Experiment& exp) {
    Writer w;
    w.raw(kCheckpointMagic, sizeof kCheckpointMagic);
    w.pod(kCheckpointVersion);
    w.str(exp.config().to_json().dump());
    w.u64(shard_digest(exp.shards()));

    const auto& s = exp.server();
    w.i32(s.round);
    w.doubles(s.gen.values);
    w.doubles(s.disc.values);
    w.doubles(s.cls.values);

    w.u64(exp.clients().size());
    for (const auto& c : exp.clients()) {
        w.i32(c.client_id);
        w.doubles(c.gen.values);
        w.doubles(c.disc.values);
        w.doubles(c.cls.values);
        put_opt(w, c.gen_opt);
        put_opt(w, c.disc_opt);
        put_opt(w, c.cls_opt);
    }

    const auto& entries = exp.ledger().entries();
    w.u64(entries.size());
    for (const auto& e : entries) {
        w.i32(e.round);
        w.i32(e.client_id);
        w.pod(static_cast<std::uint8_t>(e.direction));
        w.pod(static_cast<std::uint8_t>(e.kind));
        w.u64(e.floats);
    }

    const auto& m = exp.metrics();
    w.u64(m.clients);
    w.u64(m.records.size());
    for (const auto& rec : m.records) {
        w.i32(rec.round);
        put_summary(w, rec.accuracy);
        w.flag(rec.local_accuracy.has_value());
        if (rec.local_accuracy) put_summary(w, *rec.local_accuracy);
        w.f64(rec.losses.discriminator);
        w.f64(rec.losses.generator);
        w.f64(rec.losses.classifier);
        w.f64(rec.losses.distill);
        put_totals(w, rec.ledger);
        w.f64(rec.wall_seconds);
    }

    w.u64(exp.rounds().size());
    for (const auto& r : exp.rounds()) {
        w.i32(r.round);
        w.ints(r.selected);
        w.flag(r.distilled);
        w.u64(r.clients.size());
        for (const auto& c : r.clients) {
            w.i32(c.client_id);
            w.u64(c.local_steps);
            w.f64(c.loss_discriminator);
            w.f64(c.loss_generator);
            w.f64(c.loss_classifier);
            w.f64(c.loss_distill);
            w.u64(c.fake_digest);
            w.u64(c.gen_digest);
            w.u64(c.disc_digest);
        }
        put_totals(w, r.ledger);
        w.u64(r.warnings.size());
        for (const auto& s2 : r.warnings) w.str(s2);
    }

    auto& buf = w.buffer();
    const std::uint64_t sum = fnv1a(buf.data(), buf.size());
    buf.append(reinterpret_cast<const char*>(&sum), sizeof sum);
    return buf;
}

void save_checkpoint(const Experiment& exp, const std::filesystem::path& path) {
    // Write then rename so an interrupted save never leaves a half-written checkpoint.
    auto tmp = path;
    tmp += ".tmp";
    write_text_file(tmp, encode_checkpoint(exp));
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move checkpoint into place at '" + path.string() + "': " + ec.message());
}

std::unique_ptr<Experiment> decode_checkpoint(const std::string& bytes) {
    constexpr std::size_t kHeader = sizeof kCheckpointMagic + sizeof(std::uint32_t);
    if (bytes.size() < kHeader + sizeof(std::uint64_t)) throw LengthError("checkpoint header", kHeader + sizeof(std::uint64_t), bytes.size());
    if (std::memcmp(bytes.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0)
        throw FormatError("checkpoint: bad magic (not a checkpoint file)");
    std::uint32_t version = 0;
    std::memcpy(&version, bytes.data() + sizeof kCheckpointMagic, sizeof version);
    if (version != kCheckpointVersion)
        throw FormatError("checkpoint: unsupported version " + std::to_string(version) + " (expected " +
                          std::to_string(kCheckpointVersion) + ")");
    const std::size_t body = bytes.size() - sizeof(std::uint64_t);
    std::uint64_t stored = 0;
    std::memcpy(&stored, bytes.data() + body, sizeof stored);
    if (stored != fnv1a(bytes.data(), body)) throw FormatError("checkpoint: checksum mismatch (file is corrupt)");

    Reader r(bytes.data() + kHeader, body - kHeader);
    RunConfig cfg;
    try {
        cfg = RunConfig::from_json(nlohmann::json::parse(r.str()));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint: embedded config is not valid JSON: ") + e.what());
    }
    const std::uint64_t digest = r.u64();
    auto exp = std::make_unique<Experiment>(cfg);
    if (digest != shard_digest(exp->shards()))
        throw FormatError("checkpoint: regenerated partition differs from the saved one (data files changed?)");

    auto& s = CheckpointAccess::server(*exp);
    s.round = r.i32();
    get_params(r, s.gen, "server generator");
    get_params(r, s.disc, "server discriminator");
    get_params(r, s.cls, "server classifier");

    auto& clients = CheckpointAccess::clients(*exp);
    const auto n_clients = r.u64();
    if (n_clients != clients.size()) throw DimensionError("checkpoint: client count", clients.size(), n_clients);
    for (auto& c : clients) {
        c.client_id = r.i32();
        get_params(r, c.gen, "client generator");
        get_params(r, c.disc, "client discriminator");
        get_params(r, c.cls, "client classifier");
        get_opt(r, c.gen_opt);
        get_opt(r, c.disc_opt);
        get_opt(r, c.cls_opt);
    }

    auto& ledger = CheckpointAccess::ledger(*exp);
    ledger.entries().clear();
    const auto n_entries = r.count(18);
    for (std::size_t i = 0; i < n_entries; ++i) {
        fed::LedgerEntry e;
        e.round = r.i32();
        e.client_id = r.i32();
        auto dir = r.pod<std::uint8_t>();
        auto kind = r.pod<std::uint8_t>();
        if (dir > 1 || kind >= fed::kAllPayloadKinds.size()) throw FormatError("checkpoint: bad ledger entry");
        e.direction = static_cast<fed::Direction>(dir);
        e.kind = static_cast<fed::PayloadKind>(kind);
        e.floats = r.u64();
        ledger.entries().push_back(e);
    }

    auto& m = CheckpointAccess::metrics(*exp);
    m.clients = r.u64();
    m.records.clear();
    const auto n_records = r.count(1);
    for (std::size_t i = 0; i < n_records; ++i) {
        MetricsRecord rec;
        rec.round = r.i32();
        rec.accuracy = get_summary(r);
        if (r.flag()) rec.local_accuracy = get_summary(r);
        rec.losses.discriminator = r.f64();
        rec.losses.generator = r.f64();
        rec.losses.classifier = r.f64();
        rec.losses.distill = r.f64();
        rec.ledger = get_totals(r);
        rec.wall_seconds = r.f64();
        m.records.push_back(std::move(rec));
    }

    auto& rounds = CheckpointAccess::rounds(*exp);
    rounds.clear();
    const auto n_rounds = r.count(1);
    for (std::size_t i = 0; i < n_rounds; ++i) {
        fed::RoundRecord rec;
        rec.round = r.i32();
        rec.selected = r.ints();
        rec.distilled = r.flag();
        const auto nc = r.count(1);
        for (std::size_t j = 0; j < nc; ++j) {
            fed::ClientRoundRecord c;
            c.client_id = r.i32();
            c.local_steps = r.u64();
            c.loss_discriminator = r.f64();
            c.loss_generator = r.f64();
            c.loss_classifier = r.f64();
            c.loss_distill = r.f64();
            c.fake_digest = r.u64();
            c.gen_digest = r.u64();
            c.disc_digest = r.u64();
            rec.clients.push_back(c);
        }
        rec.ledger = get_totals(r);
        const auto nw = r.count(1);
        for (std::size_t j = 0; j < nw; ++j) rec.warnings.push_back(r.str());
        rounds.push_back(std::move(rec));
    }
    if (!r.done()) throw FormatError("checkpoint: trailing bytes after payload");
    return exp;
}

std::unique_ptr<Experiment> load_checkpoint(const std::filesystem::path& path) {
    auto bytes = data::read_file_bytes(path);
    return decode_checkpoint(std::string(bytes.begin(), bytes.end()));
}

}  // namespace feddtg::exp
