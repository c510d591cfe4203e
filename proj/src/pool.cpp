#include "procloop/pool.hpp"

#include "procloop/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace procloop {

const PoolEntry& InstancePool::record(const Instance& inst, bool success) {
    auto key = serialize_instance(inst);
    auto it = index_.find(key);
    if (it == index_.end()) {
        entries_.push_back(PoolEntry{next_id_++, inst, 0, 0});
        it = index_.emplace(key, entries_.size() - 1).first;
    }
    auto& e = entries_[it->second];
    ++e.frequency;
    if (success) ++e.success_count;
    ++total_;
    return e;
}

const PoolEntry& InstancePool::insert(const Instance& inst, std::int64_t frequency,
                                      std::int64_t success_count, std::optional<std::int64_t> id) {
    if (frequency < 0 || success_count < 0 || success_count > frequency)
        throw Error(Errc::InvalidArgument, "pool entry needs 0 <= Q <= N");
    auto key = serialize_instance(inst);
    if (index_.count(key)) throw Error(Errc::InvalidArgument, "duplicate pool instance '" + key + "'");
    std::int64_t eid = id.value_or(next_id_);
    if (eid < 1 || find_id(eid)) throw Error(Errc::InvalidArgument, "bad or duplicate pool id");
    entries_.push_back(PoolEntry{eid, inst, frequency, success_count});
    index_.emplace(std::move(key), entries_.size() - 1);
    total_ += frequency;
    next_id_ = std::max(next_id_, eid + 1);
    return entries_.back();
}

const PoolEntry* InstancePool::find(const Instance& inst) const {
    auto it = index_.find(serialize_instance(inst));
    return it == index_.end() ? nullptr : &entries_[it->second];
}

const PoolEntry* InstancePool::find_id(std::int64_t id) const {
    for (const auto& e : entries_)
        if (e.id == id) return &e;
    return nullptr;
}

std::string InstancePool::to_csv() const {
    std::string out = "id,instance,frequency,success\n";
    for (const auto& e : entries_) {
        out += std::to_string(e.id) + ',' + serialize_instance(e.instance) + ',' +
               std::to_string(e.frequency) + ',' + std::to_string(e.success_count) + '\n';
    }
    return out;
}

namespace {

std::int64_t parse_int(std::string_view field, std::size_t line_no) {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size())
        throw Error(Errc::ParseError, "pool csv line " + std::to_string(line_no) + ": bad integer '" +
                                          std::string(field) + "'");
    return v;
}

}  // namespace

InstancePool InstancePool::from_csv(std::string_view text) {
    InstancePool pool;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool header_seen = false;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        auto line = text.substr(pos, nl == text.npos ? text.npos : nl - pos);
        pos = nl == text.npos ? text.size() : nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        if (!header_seen) {
            if (line != "id,instance,frequency,success")
                throw Error(Errc::ParseError, "pool csv header must be 'id,instance,frequency,success'");
            header_seen = true;
            continue;
        }
        std::vector<std::string_view> fields;
        std::size_t start = 0;
        while (true) {
            auto comma = line.find(',', start);
            fields.push_back(line.substr(start, comma == line.npos ? line.npos : comma - start));
            if (comma == line.npos) break;
            start = comma + 1;
        }
        if (fields.size() != 4)
            throw Error(Errc::ParseError, "pool csv line " + std::to_string(line_no) + ": expected 4 fields");
        auto id = parse_int(fields[0], line_no);
        auto n = parse_int(fields[2], line_no);
        auto q = parse_int(fields[3], line_no);
        if (q > n)
            throw Error(Errc::ParseError,
                        "pool csv line " + std::to_string(line_no) + ": success count exceeds frequency");
        if (n < 0 || q < 0)
            throw Error(Errc::ParseError, "pool csv line " + std::to_string(line_no) + ": negative count");
        try {
            pool.insert(parse_instance(fields[1]), n, q, id);
        } catch (const Error& e) {
            throw Error(Errc::ParseError, "pool csv line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!header_seen) throw Error(Errc::ParseError, "pool csv is empty");
    return pool;
}

void InstancePool::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
    out << to_csv();
}

InstancePool InstancePool::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return from_csv(buf.str());
}

bool operator==(const InstancePool& a, const InstancePool& b) {
    if (a.total_ != b.total_ || a.entries_.size() != b.entries_.size()) return false;
    for (std::size_t i = 0; i < a.entries_.size(); ++i) {
        const auto& x = a.entries_[i];
        const auto& y = b.entries_[i];
        if (x.id != y.id || !(x.instance == y.instance) || x.frequency != y.frequency ||
            x.success_count != y.success_count)
            return false;
    }
    return true;
}

std::string to_string(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::Uct: return "uct";
        case StrategyKind::FailureRate: return "failure_rate";
        case StrategyKind::Frequency: return "frequency";
    }
    return "?";
}

StrategyKind parse_strategy(std::string_view name) {
    if (name == "uct") return StrategyKind::Uct;
    if (name == "failure_rate" || name == "failure-rate") return StrategyKind::FailureRate;
    if (name == "frequency") return StrategyKind::Frequency;
    throw Error(Errc::InvalidArgument, "unknown strategy '" + std::string(name) + "'");
}

double success_rate(const PoolEntry& entry) {
    if (entry.frequency <= 0) throw Error(Errc::ZeroFrequency, "entry " + std::to_string(entry.id) + " never executed");
    return static_cast<double>(entry.success_count) / static_cast<double>(entry.frequency);
}

double uct_score(const PoolEntry& entry, std::int64_t pool_total, double c) {
    if (entry.frequency <= 0) throw Error(Errc::ZeroFrequency, "entry " + std::to_string(entry.id) + " never executed");
    if (pool_total <= 0) throw Error(Errc::NonPositiveTotal, "pool total must be positive");
    double n = static_cast<double>(entry.frequency);
    return 1.0 - success_rate(entry) + c * std::sqrt(std::log(static_cast<double>(pool_total)) / n);
}

const PoolEntry& select_next(const InstancePool& pool, const SelectionStrategy& strategy,
                             std::mt19937_64& rng) {
    if (pool.empty()) throw Error(Errc::EmptyPool, "cannot select from an empty pool");

    // Higher is better for every strategy.
    std::vector<std::pair<double, std::size_t>> scored;
    const auto& entries = pool.entries();
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        if (e.frequency <= 0) continue;
        switch (strategy.kind) {
            case StrategyKind::Uct:
                scored.emplace_back(uct_score(e, pool.total(), strategy.c), i);
                break;
            case StrategyKind::FailureRate:
                if (e.success_count < e.frequency) scored.emplace_back(1.0 - success_rate(e), i);
                break;
            case StrategyKind::Frequency:
                scored.emplace_back(-static_cast<double>(e.frequency), i);
                break;
        }
    }
    if (scored.empty()) {
        if (strategy.kind == StrategyKind::FailureRate)
            throw Error(Errc::NoEligibleEntry, "every entry has a perfect success rate");
        throw Error(Errc::EmptyPool, "no executed entries to select from");
    }

    double best = scored.front().first;
    for (const auto& [s, _] : scored) best = std::max(best, s);
    std::vector<std::size_t> tied;
    for (const auto& [s, i] : scored)
        if (std::abs(s - best) <= 1e-12 * std::max(1.0, std::abs(best))) tied.push_back(i);
    std::uniform_int_distribution<std::size_t> pick(0, tied.size() - 1);
    return entries[tied[pick(rng)]];
}

const PoolEntry& select_next(const InstancePool& pool, const SelectionStrategy& strategy,
                             std::uint64_t rng_seed) {
    std::mt19937_64 rng(rng_seed);
    return select_next(pool, strategy, rng);
}

ReplayReport replay(InstancePool& pool, const SelectionStrategy& strategy, const Executor& executor,
                    std::size_t rounds, std::uint64_t rng_seed) {
    if (rounds < 1) throw Error(Errc::InvalidArgument, "replay needs at least one round");
    std::mt19937_64 rng(rng_seed);

    std::set<std::int64_t> pending;
    for (const auto& e : pool.entries()) pending.insert(e.id);
    std::size_t initial = pending.size();

    ReplayReport report;
    for (std::size_t r = 0; r < rounds; ++r) {
        const PoolEntry* picked = nullptr;
        try {
            picked = &select_next(pool, strategy, rng);
        } catch (const Error& e) {
            // Failure-rate selection runs dry once every entry is perfect.
            if (e.code() == Errc::NoEligibleEntry) break;
            throw;
        }
        const auto& chosen = *picked;
        Instance inst = chosen.instance;
        ReplayRound round{chosen.id, false, {}};
        try {
            round.success = executor(inst);
        } catch (const std::exception& e) {
            round.success = false;
            round.executor_error = e.what();
        }
        pool.record(inst, round.success);
        pending.erase(round.entry_id);
        report.rounds.push_back(std::move(round));
        report.coverage_curve.push_back(initial - pending.size());
        if (pending.empty() && !report.coverage_attempt) report.coverage_attempt = r + 1;
    }
    return report;
}

std::vector<PoolEntry> filter_by_sr(const InstancePool& pool, double threshold) {
    if (threshold < 0.0 || threshold > 1.0)
        throw Error(Errc::InvalidArgument, "threshold must lie in [0, 1]");
    std::vector<PoolEntry> out;
    for (const auto& e : pool.entries())
        if (e.frequency > 0 && success_rate(e) >= threshold) out.push_back(e);
    std::stable_sort(out.begin(), out.end(), [](const PoolEntry& a, const PoolEntry& b) {
        // Q_a/N_a vs Q_b/N_b compared exactly.
        auto lhs = a.success_count * b.frequency;
        auto rhs = b.success_count * a.frequency;
        if (lhs != rhs) return lhs > rhs;
        if (a.frequency != b.frequency) return a.frequency > b.frequency;
        return a.id < b.id;
    });
    return out;
}

}  // namespace procloop
