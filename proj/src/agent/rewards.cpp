#include "babrl/agent/rewards.hpp"

#include <cmath>

namespace babrl::agent {

std::vector<RewardRecord> record_delayed_rewards(const EventLog& log)
{
    struct Open {
        std::uint64_t id;
        std::int64_t record; // -1 for leaves
    };
    std::vector<RewardRecord> out;
    std::vector<Open> stack;
    std::size_t closes = 0;
    bool finished_root = false;

    for (const SearchEvent& e : log) {
        if (e.kind == SearchEvent::Kind::Node) {
            if (finished_root)
                throw RewardLogError("event log: node " + std::to_string(e.id) + " after the root closed");
            const std::int64_t expected = stack.empty() ? -1 : static_cast<std::int64_t>(stack.back().id);
            if (e.parent != expected)
                throw RewardLogError("event log: node " + std::to_string(e.id) + " has parent " +
                                     std::to_string(e.parent) + " but the innermost open node is " +
                                     std::to_string(expected));
            std::int64_t rec = -1;
            if (e.outcome == NodeOutcome::Split) {
                if (!e.split || e.unfixed == 0)
                    throw RewardLogError("event log: split node " + std::to_string(e.id) + " without a candidate");
                RewardRecord r;
                r.node_id = e.id;
                r.action = *e.split;
                r.depth = e.depth;
                r.unfixed = e.unfixed;
                r.actual = 1;
                r.full = std::ldexp(1.0, static_cast<int>(e.unfixed)) - 1.0;
                rec = static_cast<std::int64_t>(out.size());
                out.push_back(r);
            }
            stack.push_back({e.id, rec});
            continue;
        }
        if (stack.empty() || stack.back().id != e.id)
            throw RewardLogError("event log: close " + std::to_string(e.id) + " does not match the innermost open node");
        const Open done = stack.back();
        stack.pop_back();
        if (stack.empty())
            finished_root = true;
        if (done.record < 0)
            continue;
        RewardRecord& r = out[static_cast<std::size_t>(done.record)];
        r.reward = -static_cast<double>(r.actual) / r.full;
        r.close_order = closes++;
        for (auto it = stack.rbegin(); it != stack.rend(); ++it)
            if (it->record >= 0) {
                out[static_cast<std::size_t>(it->record)].actual += r.actual;
                break;
            }
    }
    if (!stack.empty())
        throw RewardLogError("event log: " + std::to_string(stack.size()) + " node(s) never closed");
    return out;
}

} // namespace babrl::agent
