#include "tsad/label_channel.hpp"

#include <algorithm>

namespace tsad {

const char* to_string(QueryState state) {
    switch (state) {
        case QueryState::pending: return "pending";
        case QueryState::resolved: return "resolved";
        case QueryState::cancelled: return "cancelled";
    }
    return "pending";
}

std::vector<std::string> LabelChannel::post(std::vector<QueryMessage> queries) {
    std::vector<std::string> ids;
    {
        std::lock_guard lock(mutex_);
        for (auto& q : queries) {
            const std::string id = "q" + std::to_string(next_id_++);
            q.query_id = id;
            ids.push_back(id);
            order_.push_back(id);
            records_[id] = Record{std::move(q), QueryState::pending, std::nullopt};
        }
    }
    return ids;
}

std::vector<QueryMessage> LabelChannel::pending() const {
    std::lock_guard lock(mutex_);
    std::vector<QueryMessage> out;
    for (const auto& id : order_) {
        const auto& rec = records_.at(id);
        if (rec.state == QueryState::pending) out.push_back(rec.query);
    }
    return out;
}

LabelChannel::SubmitResult LabelChannel::submit(const LabelMessage& label) {
    {
        std::lock_guard lock(mutex_);
        auto it = records_.find(label.query_id);
        if (it == records_.end()) return SubmitResult::unknown_query;
        if (label.label != 0 && label.label != 1) return SubmitResult::invalid_label;
        if (it->second.state != QueryState::pending) return SubmitResult::not_pending;
        it->second.state = QueryState::resolved;
        it->second.label = label;
    }
    resolved_.notify_all();
    return SubmitResult::accepted;
}

std::optional<QueryState> LabelChannel::state(const std::string& query_id) const {
    std::lock_guard lock(mutex_);
    auto it = records_.find(query_id);
    if (it == records_.end()) return std::nullopt;
    return it->second.state;
}

std::optional<std::vector<LabelMessage>> LabelChannel::wait(const std::vector<std::string>& ids,
                                                            std::chrono::milliseconds timeout) {
    std::unique_lock lock(mutex_);
    auto all_resolved = [&] {
        return std::all_of(ids.begin(), ids.end(), [&](const std::string& id) {
            auto it = records_.find(id);
            return it != records_.end() && it->second.state == QueryState::resolved;
        });
    };
    if (!resolved_.wait_for(lock, timeout, all_resolved)) {
        for (const auto& id : ids) {
            auto it = records_.find(id);
            if (it != records_.end() && it->second.state == QueryState::pending)
                it->second.state = QueryState::cancelled;
        }
        return std::nullopt;
    }
    std::vector<LabelMessage> out;
    for (const auto& id : ids) out.push_back(*records_.at(id).label);
    return out;
}

void LabelChannel::cancel(const std::vector<std::string>& ids) {
    std::lock_guard lock(mutex_);
    for (const auto& id : ids) {
        auto it = records_.find(id);
        if (it != records_.end() && it->second.state == QueryState::pending)
            it->second.state = QueryState::cancelled;
    }
}

void LabelChannel::update_status(int episode, double lambda, std::size_t budget_spent,
                                 std::size_t budget_total) {
    std::lock_guard lock(mutex_);
    status_.episode = episode;
    status_.lambda = lambda;
    status_.budget_spent = budget_spent;
    status_.budget_total = budget_total;
}

ServiceStatus LabelChannel::status() const {
    std::lock_guard lock(mutex_);
    ServiceStatus s = status_;
    s.pending_count = static_cast<std::size_t>(
        std::count_if(records_.begin(), records_.end(),
                      [](const auto& kv) { return kv.second.state == QueryState::pending; }));
    return s;
}

}  // namespace tsad
