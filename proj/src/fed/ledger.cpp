#include "feddtg/fed/ledger.hpp"

namespace feddtg::fed {

std::string_view to_string(PayloadKind k) {
    switch (k) {
        case PayloadKind::generator: return "generator";
        case PayloadKind::discriminator: return "discriminator";
        case PayloadKind::soft_labels: return "soft_labels";
        case PayloadKind::distill_targets: return "distill_targets";
        case PayloadKind::classifier: return "classifier";
    }
    return "unknown";
}

std::string_view to_string(Direction d) { return d == Direction::uplink ? "uplink" : "downlink"; }

const std::array<std::string_view, LedgerTotals::kFieldCount>& LedgerTotals::field_names() {
    static const std::array<std::string_view, kFieldCount> names{
        "uplink_total",        "downlink_total",        "uplink_generator",      "uplink_discriminator",
        "uplink_soft_labels",  "uplink_classifier",     "downlink_generator",    "downlink_discriminator",
        "downlink_distill_targets", "downlink_classifier"};
    return names;
}

std::array<std::uint64_t, LedgerTotals::kFieldCount> LedgerTotals::values() const {
    return {uplink_total,       downlink_total,         uplink_generator,       uplink_discriminator,
            uplink_soft_labels, uplink_classifier,      downlink_generator,     downlink_discriminator,
            downlink_distill_targets, downlink_classifier};
}

void CommLedger::record(int round, int client_id, Direction dir, PayloadKind kind, std::uint64_t floats) {
    entries_.push_back({round, client_id, dir, kind, floats});
}

std::uint64_t CommLedger::total(Direction dir) const {
    std::uint64_t s = 0;
    for (const auto& e : entries_) {
        if (e.direction == dir) s += e.floats;
    }
    return s;
}

std::uint64_t CommLedger::total(Direction dir, PayloadKind kind) const {
    std::uint64_t s = 0;
    for (const auto& e : entries_) {
        if (e.direction == dir && e.kind == kind) s += e.floats;
    }
    return s;
}

std::uint64_t CommLedger::client_round(int round, int client_id, Direction dir) const {
    std::uint64_t s = 0;
    for (const auto& e : entries_) {
        if (e.round == round && e.client_id == client_id && e.direction == dir) s += e.floats;
    }
    return s;
}

std::uint64_t CommLedger::client_round(int round, int client_id, Direction dir, PayloadKind kind) const {
    std::uint64_t s = 0;
    for (const auto& e : entries_) {
        if (e.round == round && e.client_id == client_id && e.direction == dir && e.kind == kind) s += e.floats;
    }
    return s;
}

namespace {

void accumulate(LedgerTotals& t, const LedgerEntry& e) {
    if (e.direction == Direction::uplink) {
        t.uplink_total += e.floats;
        switch (e.kind) {
            case PayloadKind::generator: t.uplink_generator += e.floats; break;
            case PayloadKind::discriminator: t.uplink_discriminator += e.floats; break;
            case PayloadKind::soft_labels: t.uplink_soft_labels += e.floats; break;
            case PayloadKind::classifier: t.uplink_classifier += e.floats; break;
            case PayloadKind::distill_targets: break;
        }
    } else {
        t.downlink_total += e.floats;
        switch (e.kind) {
            case PayloadKind::generator: t.downlink_generator += e.floats; break;
            case PayloadKind::discriminator: t.downlink_discriminator += e.floats; break;
            case PayloadKind::distill_targets: t.downlink_distill_targets += e.floats; break;
            case PayloadKind::classifier: t.downlink_classifier += e.floats; break;
            case PayloadKind::soft_labels: break;
        }
    }
}

}  // namespace

LedgerTotals CommLedger::round_totals(int round) const {
    LedgerTotals t;
    for (const auto& e : entries_) {
        if (e.round == round) accumulate(t, e);
    }
    return t;
}

LedgerTotals CommLedger::totals() const {
    LedgerTotals t;
    for (const auto& e : entries_) accumulate(t, e);
    return t;
}

}  // namespace feddtg::fed
