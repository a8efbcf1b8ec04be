#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace tsad {

// One window offered to a human annotator.
struct QueryMessage {
    std::string query_id;
    std::size_t window_index = 0;
    std::vector<double> values;   // the standardized window the agent saw
    std::vector<double> context;  // up to 3 * n_steps raw values around it
};

struct LabelMessage {
    std::string query_id;
    int label = 0;
    std::string annotator;
    std::string timestamp;
};

struct ServiceStatus {
    int episode = 0;
    double lambda = 0.0;
    std::size_t budget_spent = 0;
    std::size_t budget_total = 0;
    std::size_t pending_count = 0;
};

enum class QueryState { pending, resolved, cancelled };
const char* to_string(QueryState state);

// Thread-safe mailbox between the training loop and the labeling service.
// The loop posts query batches and blocks in wait(); the service thread lists
// pending queries and submits labels.
class LabelChannel {
public:
    enum class SubmitResult { accepted, unknown_query, not_pending, invalid_label };

    // Assigns ids ("q1", "q2", ...) and returns them in input order.
    std::vector<std::string> post(std::vector<QueryMessage> queries);
    std::vector<QueryMessage> pending() const;
    SubmitResult submit(const LabelMessage& label);
    std::optional<QueryState> state(const std::string& query_id) const;

    // Labels for every id, in order, or nullopt if the timeout expired first;
    // on timeout the still-pending ids are cancelled.
    std::optional<std::vector<LabelMessage>> wait(const std::vector<std::string>& ids,
                                                  std::chrono::milliseconds timeout);
    void cancel(const std::vector<std::string>& ids);

    void update_status(int episode, double lambda, std::size_t budget_spent, std::size_t budget_total);
    ServiceStatus status() const;

private:
    struct Record {
        QueryMessage query;
        QueryState state = QueryState::pending;
        std::optional<LabelMessage> label;
    };

    mutable std::mutex mutex_;
    std::condition_variable resolved_;
    std::map<std::string, Record> records_;
    std::vector<std::string> order_;
    std::size_t next_id_ = 1;
    ServiceStatus status_;
};

}  // namespace tsad
