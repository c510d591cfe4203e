#pragma once
// Execution statistics per distinct instance, replay selection and the
// success-rate filter.

#include "procloop/instance.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace procloop {

struct PoolEntry {
    std::int64_t id = 0;
    Instance instance;
    std::int64_t frequency = 0;      // N(i)
    std::int64_t success_count = 0;  // Q(i), never above frequency
};

class InstancePool {
public:
    InstancePool() = default;

    // Upserts and returns the updated entry.
    const PoolEntry& record(const Instance& inst, bool success);

    // Adds an entry with preset counters (synthetic pools, loading).
    // Throws InvalidArgument when the instance is already present or Q > N.
    const PoolEntry& insert(const Instance& inst, std::int64_t frequency, std::int64_t success_count,
                            std::optional<std::int64_t> id = std::nullopt);

    const PoolEntry* find(const Instance& inst) const;
    const PoolEntry* find_id(std::int64_t id) const;
    const std::vector<PoolEntry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    std::int64_t total() const noexcept { return total_; }

    // CSV with header `id,instance,frequency,success`.
    std::string to_csv() const;
    static InstancePool from_csv(std::string_view text);
    void save(const std::filesystem::path& path) const;
    static InstancePool load(const std::filesystem::path& path);

    friend bool operator==(const InstancePool& a, const InstancePool& b);

private:
    std::vector<PoolEntry> entries_;
    std::map<std::string, std::size_t> index_;
    std::int64_t total_ = 0;
    std::int64_t next_id_ = 1;
};

enum class StrategyKind { Uct, FailureRate, Frequency };

struct SelectionStrategy {
    StrategyKind kind = StrategyKind::Uct;
    double c = 1.0;

    static SelectionStrategy uct(double c = 1.0) { return {StrategyKind::Uct, c}; }
    static SelectionStrategy failure_rate() { return {StrategyKind::FailureRate, 1.0}; }
    static SelectionStrategy frequency() { return {StrategyKind::Frequency, 1.0}; }
};

std::string to_string(StrategyKind kind);
StrategyKind parse_strategy(std::string_view name);

double success_rate(const PoolEntry& entry);
// 1 - Q/N + c * sqrt(ln(total) / N)
double uct_score(const PoolEntry& entry, std::int64_t pool_total, double c);

// Ties are broken uniformly at random with the given generator.
const PoolEntry& select_next(const InstancePool& pool, const SelectionStrategy& strategy,
                             std::mt19937_64& rng);
const PoolEntry& select_next(const InstancePool& pool, const SelectionStrategy& strategy,
                             std::uint64_t rng_seed);

using Executor = std::function<bool(const Instance&)>;

struct ReplayRound {
    std::int64_t entry_id = 0;
    bool success = false;
    std::string executor_error;  // non-empty when the executor threw
};

struct ReplayReport {
    std::vector<ReplayRound> rounds;
    // 1-based attempt at which every entry present at the start had been
    // selected at least once.
    std::optional<std::size_t> coverage_attempt;
    std::vector<std::size_t> coverage_curve;  // distinct entries visited after each attempt
};

// Stops early when the strategy has no eligible entry left.
ReplayReport replay(InstancePool& pool, const SelectionStrategy& strategy, const Executor& executor,
                    std::size_t rounds, std::uint64_t rng_seed);

// success_rate >= threshold, by success rate desc then frequency desc.
// Entries never executed are skipped.
std::vector<PoolEntry> filter_by_sr(const InstancePool& pool, double threshold);

}  // namespace procloop
