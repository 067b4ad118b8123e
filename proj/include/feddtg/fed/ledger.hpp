#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

namespace feddtg::fed {

enum class Direction : std::uint8_t { uplink, downlink };

enum class PayloadKind : std::uint8_t { generator, discriminator, soft_labels, distill_targets, classifier };

inline constexpr std::array<PayloadKind, 5> kAllPayloadKinds{PayloadKind::generator, PayloadKind::discriminator,
                                                             PayloadKind::soft_labels, PayloadKind::distill_targets,
                                                             PayloadKind::classifier};

std::string_view to_string(PayloadKind k);
std::string_view to_string(Direction d);

struct LedgerEntry {
    int round = 0;
    int client_id = 0;
    Direction direction = Direction::uplink;
    PayloadKind kind = PayloadKind::generator;
    std::uint64_t floats = 0;

    friend bool operator==(const LedgerEntry&, const LedgerEntry&) = default;
};

/// Cumulative totals in the fixed column order used by metrics files.
struct LedgerTotals {
    std::uint64_t uplink_total = 0;
    std::uint64_t downlink_total = 0;
    std::uint64_t uplink_generator = 0;
    std::uint64_t uplink_discriminator = 0;
    std::uint64_t uplink_soft_labels = 0;
    std::uint64_t uplink_classifier = 0;
    std::uint64_t downlink_generator = 0;
    std::uint64_t downlink_discriminator = 0;
    std::uint64_t downlink_distill_targets = 0;
    std::uint64_t downlink_classifier = 0;

    static constexpr std::size_t kFieldCount = 10;
    static const std::array<std::string_view, kFieldCount>& field_names();
    std::array<std::uint64_t, kFieldCount> values() const;

    friend bool operator==(const LedgerTotals&, const LedgerTotals&) = default;
};

/// Every simulated transfer, priced in float count.
class CommLedger {
public:
    void record(int round, int client_id, Direction dir, PayloadKind kind, std::uint64_t floats);

    const std::vector<LedgerEntry>& entries() const noexcept { return entries_; }
    std::vector<LedgerEntry>& entries() noexcept { return entries_; }

    std::uint64_t total(Direction dir) const;
    std::uint64_t total(Direction dir, PayloadKind kind) const;
    /// Floats moved for one client in one round, optionally restricted to a kind.
    std::uint64_t client_round(int round, int client_id, Direction dir) const;
    std::uint64_t client_round(int round, int client_id, Direction dir, PayloadKind kind) const;
    /// Totals restricted to a single round.
    LedgerTotals round_totals(int round) const;
    LedgerTotals totals() const;

private:
    std::vector<LedgerEntry> entries_;
};

}  // namespace feddtg::fed
