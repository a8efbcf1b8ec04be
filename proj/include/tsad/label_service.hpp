#pragma once

#include "tsad/label_channel.hpp"

#include <filesystem>
#include <memory>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace tsad {

// HTTP front end of a LabelChannel:
//   GET  /api/queries        pending queries
//   GET  /api/queries/<id>   state of one query
//   POST /api/labels         {"query_id": ..., "label": 0|1}
//   GET  /api/status         training progress and budget
//   GET  /                   static UI (ui_dir, or a minimal built-in page)
class LabelService {
public:
    LabelService(LabelChannel& channel, std::filesystem::path ui_dir = {});
    ~LabelService();
    LabelService(const LabelService&) = delete;
    LabelService& operator=(const LabelService&) = delete;

    // Binds and starts listening on a background thread. Port 0 picks a free
    // port. Throws IoError when the port is taken.
    void start(const std::string& host, int port);
    void stop();
    int port() const { return port_; }
    bool running() const;

private:
    void install_routes();

    LabelChannel& channel_;
    std::filesystem::path ui_dir_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    int port_ = 0;
};

}  // namespace tsad
