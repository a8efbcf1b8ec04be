#include "tsad/label_service.hpp"

#include "tsad/errors.hpp"

#include <httplib.h>
#include <json.hpp>

#include <sys/socket.h>

namespace tsad {

using nlohmann::json;

namespace {

const char* kPlaceholderPage = R"(<!doctype html>
<html><head><meta charset="utf-8"><title>labeling</title></head>
<body>
<h1>Pending queries</h1>
<p>No UI bundle configured. The labeling API is available under /api.</p>
<pre id="status"></pre>
<script>
fetch('/api/status').then(r => r.json()).then(s => {
  document.getElementById('status').textContent = JSON.stringify(s, null, 2);
});
</script>
</body></html>
)";

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& kind, const std::string& message) {
    send_json(res, status, json{{"error", kind}, {"message", message}});
}

json query_json(const QueryMessage& q) {
    return json{{"query_id", q.query_id},
                {"window_index", q.window_index},
                {"values", q.values},
                {"context", q.context}};
}

// Accepts 0/1 as a number or a decimal string.
std::optional<int> parse_label(const json& value) {
    if (value.is_number_integer()) return value.get<int>();
    if (value.is_number_float()) {
        const double d = value.get<double>();
        if (d == 0.0 || d == 1.0) return static_cast<int>(d);
        return std::nullopt;
    }
    if (value.is_string()) {
        const auto s = value.get<std::string>();
        if (s == "0") return 0;
        if (s == "1") return 1;
    }
    return std::nullopt;
}

}  // namespace

LabelService::LabelService(LabelChannel& channel, std::filesystem::path ui_dir)
    : channel_(channel), ui_dir_(std::move(ui_dir)), server_(std::make_unique<httplib::Server>()) {
    // Plain SO_REUSEADDR so a port already in use fails to bind.
    server_->set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
    });
    install_routes();
}

LabelService::~LabelService() { stop(); }

void LabelService::install_routes() {
    server_->Get("/api/queries", [this](const httplib::Request&, httplib::Response& res) {
        json list = json::array();
        for (const auto& q : channel_.pending()) list.push_back(query_json(q));
        send_json(res, 200, list);
    });

    server_->Get(R"(/api/queries/([A-Za-z0-9_-]+))", [this](const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.matches[1];
        const auto state = channel_.state(id);
        if (!state) return send_error(res, 404, "unknown_query", "no query with id " + id);
        send_json(res, 200, json{{"query_id", id}, {"state", to_string(*state)}});
    });

    server_->Post("/api/labels", [this](const httplib::Request& req, httplib::Response& res) {
        json body;
        try {
            body = json::parse(req.body);
        } catch (const json::exception& e) {
            return send_error(res, 400, "parse", std::string("malformed body: ") + e.what());
        }
        if (!body.is_object() || !body.contains("query_id") || !body["query_id"].is_string() ||
            !body.contains("label"))
            return send_error(res, 400, "argument", "body must carry query_id and label");
        const auto label = parse_label(body["label"]);
        LabelMessage msg;
        msg.query_id = body["query_id"].get<std::string>();
        msg.label = label.value_or(-1);
        if (body.contains("annotator") && body["annotator"].is_string()) msg.annotator = body["annotator"];
        if (body.contains("timestamp") && body["timestamp"].is_string()) msg.timestamp = body["timestamp"];
        switch (channel_.submit(msg)) {
            case LabelChannel::SubmitResult::accepted:
                return send_json(res, 200, json{{"status", "accepted"}, {"query_id", msg.query_id}});
            case LabelChannel::SubmitResult::unknown_query:
                return send_error(res, 404, "unknown_query", "no query with id " + msg.query_id);
            case LabelChannel::SubmitResult::not_pending:
                return send_error(res, 409, "not_pending", "query " + msg.query_id + " is no longer pending");
            case LabelChannel::SubmitResult::invalid_label:
                return send_error(res, 400, "invalid_label", "label must be 0 or 1");
        }
    });

    server_->Get("/api/status", [this](const httplib::Request&, httplib::Response& res) {
        const auto s = channel_.status();
        send_json(res, 200,
                  json{{"episode", s.episode},
                       {"lambda", s.lambda},
                       {"budget_spent", s.budget_spent},
                       {"budget_total", s.budget_total},
                       {"pending_count", s.pending_count}});
    });

    if (!ui_dir_.empty()) {
        if (!std::filesystem::is_directory(ui_dir_))
            throw IoError("UI directory " + ui_dir_.string() + " does not exist");
        server_->set_mount_point("/", ui_dir_.string());
    } else {
        server_->Get("/", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(kPlaceholderPage, "text/html; charset=utf-8");
        });
    }
}

void LabelService::start(const std::string& host, int port) {
    if (thread_.joinable()) throw ContractError("label service already running");
    if (port == 0) {
        port_ = server_->bind_to_any_port(host);
        if (port_ < 0) throw IoError("cannot bind a free port on " + host);
    } else {
        if (!server_->bind_to_port(host, port))
            throw IoError("port " + std::to_string(port) + " on " + host + " is busy or unavailable");
        port_ = port;
    }
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
}

void LabelService::stop() {
    if (thread_.joinable()) {
        server_->stop();
        thread_.join();
    }
}

bool LabelService::running() const { return server_->is_running(); }

}  // namespace tsad
