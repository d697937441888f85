#pragma once

#include "autofeedback/autofeedback.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#ifndef AF_DATA_DIR
#error "AF_DATA_DIR must point at the fixture directory"
#endif

namespace fixtures {

inline std::filesystem::path data_dir() { return AF_DATA_DIR; }
inline std::filesystem::path doc_path() { return data_dir() / "fixture_doc.json"; }

inline const autofeedback::ApiDocument& doc() {
    static const autofeedback::ApiDocument d = autofeedback::load_document(doc_path().string());
    return d;
}

inline const autofeedback::LoadedDoc& loaded() {
    static const autofeedback::LoadedDoc l(doc(), 0.3);
    return l;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("autofeedback-test-" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

/// Mock answering route_planning with info_code 20000 unless longitude comes first.
inline autofeedback::MockApiServer route_server() {
    using namespace autofeedback;
    MockApiServer server;
    server.add_route("route_planning", [](const ApiRequest& r) -> ApiResponse {
        const auto* origin = r.find_arg("origin");
        if (!origin || !origin->is<std::string>()) return {400, "missing origin"};
        const double first = std::stod(origin->as<std::string>());
        if (first < 90.0) return {200, "info:INVALID_PARAMS info_code:20000"};
        return {200, R"({"info":"OK","distance_m":10342})"};
    });
    server.add_route("userLogin", [](const ApiRequest&) { return ApiResponse{200, R"({"token":"t-1"})"}; });
    return server;
}

} // namespace fixtures
