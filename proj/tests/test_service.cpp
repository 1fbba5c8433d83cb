#include "bal/service.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <thread>

namespace bal {
namespace {

EmbeddedDataset service_data() {
    SynthSpec spec;
    spec.dim = 4;
    spec.n_train = 120;
    spec.n_test = 100;
    spec.seed = 3;
    return synth_two_gaussians(spec);
}

const char* kConfig = R"({"strategy":"uncertainty","seed":5,"solver_iterations":800})";

std::string annotation(std::uint64_t line_id, std::optional<long> index, int label) {
    nlohmann::json j = {{"line_id", line_id}, {"label", label}};
    if (index) {
        j["index"] = *index;
    } else {
        j["no_change"] = true;
    }
    return j.dump();
}

class ServiceTest : public ::testing::Test {
protected:
    AnnotationService service{service_data()};

    std::string create() {
        const auto r = service.create_session(kConfig);
        EXPECT_EQ(r.status, 201) << r.body;
        return r.json().at("id").get<std::string>();
    }
};

TEST_F(ServiceTest, ProtocolWalk) {
    const auto id = create();
    const auto q = service.get_query(id);
    ASSERT_EQ(q.status, 200) << q.body;
    const auto qj = q.json();
    EXPECT_EQ(qj.at("v"), 1);
    const auto s = qj.at("samples").get<long>();
    ASSERT_GT(s, 0);
    EXPECT_EQ(qj.at("t").size(), static_cast<std::size_t>(s));
    EXPECT_EQ(qj.at("index_map").size(), static_cast<std::size_t>(s));

    const auto png = service.get_strip(id, qj.at("line_id").get<std::uint64_t>());
    EXPECT_EQ(png.status, 200);
    EXPECT_EQ(png.content_type, "image/png");
    EXPECT_EQ(png.body.substr(1, 3), "PNG");

    const auto a = service.post_annotation(id, annotation(qj.at("line_id"), s / 2, 1));
    ASSERT_EQ(a.status, 200) << a.body;
    EXPECT_EQ(a.json().at("iteration"), 1);
    const auto curve = service.get_curve(id).json();
    EXPECT_EQ(curve.at("accuracies").size(), 2u);
    EXPECT_EQ(curve.at("average_precisions").size(), 2u);
    EXPECT_EQ(curve.at("v"), 1);
}

TEST_F(ServiceTest, QueryIsStableUntilAnswered) {
    const auto id = create();
    const auto first = service.get_query(id).json();
    const auto second = service.get_query(id).json();
    EXPECT_EQ(first, second);
}

TEST_F(ServiceTest, NoChangeLeavesBoundarySetAlone) {
    const auto id = create();
    const auto before = service.get_state(id).json();
    const auto q = service.get_query(id).json();
    const auto r = service.post_annotation(id, annotation(q.at("line_id"), std::nullopt, -1));
    ASSERT_EQ(r.status, 200) << r.body;
    const auto after = service.get_state(id).json();
    EXPECT_EQ(after.at("boundary_points"), before.at("boundary_points"));
    EXPECT_EQ(after.at("labeled").get<int>(), before.at("labeled").get<int>() + 1);
    EXPECT_TRUE(r.json().at("no_change").get<bool>());
}

TEST_F(ServiceTest, BoundaryClickGrowsBoundarySet) {
    const auto id = create();
    const auto q = service.get_query(id).json();
    ASSERT_EQ(service.post_annotation(id, annotation(q.at("line_id"), 0, 1)).status, 200);
    EXPECT_EQ(service.get_state(id).json().at("boundary_points"), 1);
}

TEST_F(ServiceTest, DuplicatePostIsIdempotent) {
    const auto id = create();
    const auto q = service.get_query(id).json();
    const auto body = annotation(q.at("line_id"), 1, 1);
    const auto first = service.post_annotation(id, body);
    const auto second = service.post_annotation(id, body);
    EXPECT_EQ(first.status, 200);
    EXPECT_EQ(second.status, first.status);
    EXPECT_EQ(second.body, first.body);
    const auto st = service.get_state(id).json();
    EXPECT_EQ(st.at("iteration"), 1);
    EXPECT_EQ(st.at("labeled"), 3);
    EXPECT_EQ(service.get_curve(id).json().at("accuracies").size(), 2u);
}

TEST_F(ServiceTest, ErrorPaths) {
    EXPECT_EQ(service.get_query("nope").status, 404);
    EXPECT_EQ(service.get_curve("nope").status, 404);
    EXPECT_EQ(service.post_annotation("nope", annotation(0, 0, 1)).status, 404);

    const auto id = create();
    // nothing pending yet
    EXPECT_EQ(service.post_annotation(id, annotation(0, 0, 1)).status, 409);
    const auto q = service.get_query(id).json();
    const auto line_id = q.at("line_id").get<std::uint64_t>();
    const auto s = q.at("samples").get<long>();
    EXPECT_EQ(service.post_annotation(id, annotation(line_id + 7, 0, 1)).status, 409);
    EXPECT_EQ(service.post_annotation(id, annotation(line_id, s, 1)).status, 422);
    EXPECT_EQ(service.post_annotation(id, annotation(line_id, -1, 1)).status, 422);
    EXPECT_EQ(service.post_annotation(id, annotation(line_id, 0, 0)).status, 422);
    EXPECT_EQ(service.post_annotation(id, R"({"label":1,"index":0})").status, 422);
    EXPECT_EQ(service.post_annotation(id, "not json").status, 400);
    EXPECT_EQ(service.get_strip(id, line_id + 100).status, 404);
    EXPECT_EQ(service.create_session(R"({"strategy":"magic"})").status, 422);
    EXPECT_EQ(service.create_session("[1,2]").status, 400);
    // the pending line is still answerable after rejected attempts
    EXPECT_EQ(service.post_annotation(id, annotation(line_id, 0, 1)).status, 200);
    // and the old line id is now stale
    EXPECT_EQ(service.post_annotation(id, annotation(line_id, 2, 1)).status, 409);
}

TEST_F(ServiceTest, FuzzedInterleavingsKeepCounts) {
    Xoshiro256 rng(7);
    const auto id = create();
    std::uint64_t last_line = 0;
    bool have_line = false;
    for (int step = 0; step < 300; ++step) {
        switch (rng.below(6)) {
            case 0: {
                const auto q = service.get_query(id);
                ASSERT_EQ(q.status, 200);
                last_line = q.json().at("line_id").get<std::uint64_t>();
                have_line = true;
                break;
            }
            case 1:
            case 2: {
                const long idx = static_cast<long>(rng.below(40)) - 5;
                const auto line = have_line && rng.below(4) != 0 ? last_line : rng.below(50);
                const int label = rng.below(2) ? 1 : -1;
                const auto r = service.post_annotation(id, annotation(line, rng.below(3) ? std::optional<long>(idx)
                                                                                         : std::nullopt, label));
                ASSERT_TRUE(r.status == 200 || r.status == 409 || r.status == 422) << r.body;
                break;
            }
            case 3: service.get_curve(id); break;
            case 4: service.get_strip(id, last_line); break;
            default: {
                const auto st = service.get_state(id).json();
                const int it = st.at("iteration").get<int>();
                ASSERT_EQ(st.at("labeled").get<int>(), 2 + it);
                ASSERT_LE(st.at("boundary_points").get<int>(), it);
                ASSERT_EQ(service.get_curve(id).json().at("accuracies").size(), static_cast<std::size_t>(it + 1));
            }
        }
    }
    const auto st = service.get_state(id).json();
    EXPECT_EQ(st.at("labeled").get<int>(), 2 + st.at("iteration").get<int>());
}

TEST(ServiceConcurrency, ParallelClientsOnSeparateAndSharedSessions) {
    AnnotationService service(service_data());
    std::vector<std::string> ids;
    for (int i = 0; i < 3; ++i) ids.push_back(service.create_session(kConfig).json().at("id"));
    std::vector<std::thread> workers;
    for (int w = 0; w < 6; ++w) {
        workers.emplace_back([&, w] {
            const auto& id = ids[static_cast<std::size_t>(w % 3)];
            for (int k = 0; k < 5; ++k) {
                const auto q = service.get_query(id);
                if (q.status != 200) continue;
                service.post_annotation(id, annotation(q.json().at("line_id"), 0, 1));
                service.get_curve(id);
            }
        });
    }
    for (auto& t : workers) t.join();
    for (const auto& id : ids) {
        const auto st = service.get_state(id).json();
        EXPECT_EQ(st.at("labeled").get<int>(), 2 + st.at("iteration").get<int>());
        EXPECT_GE(st.at("iteration").get<int>(), 5);
    }
}

TEST(ServiceRecovery, ReplaysStateDirectory) {
    const auto dir = std::filesystem::temp_directory_path() / "bal_service_state";
    std::filesystem::remove_all(dir);
    ServiceOptions opt;
    opt.state_dir = dir.string();
    std::string id;
    nlohmann::json before;
    {
        AnnotationService service(service_data(), opt);
        id = service.create_session(kConfig).json().at("id");
        for (int k = 0; k < 4; ++k) {
            const auto q = service.get_query(id).json();
            const std::optional<long> idx = k == 2 ? std::nullopt : std::optional<long>(k);
            ASSERT_EQ(service.post_annotation(id, annotation(q.at("line_id"), idx, k % 2 ? 1 : -1)).status, 200);
        }
        before = service.get_state(id).json();
        ASSERT_EQ(before.at("iteration"), 4);
    }
    AnnotationService restarted(service_data(), opt);
    EXPECT_EQ(restarted.recover(), 1u);
    EXPECT_EQ(restarted.session_count(), 1u);
    EXPECT_EQ(restarted.get_state(id).json(), before);
    // the session keeps going after recovery with fresh line ids
    const auto q = restarted.get_query(id).json();
    EXPECT_GE(q.at("line_id").get<int>(), 4);
    EXPECT_EQ(restarted.post_annotation(id, annotation(q.at("line_id"), 0, 1)).status, 200);
    std::filesystem::remove_all(dir);
}

TEST(ServiceTtl, ExpiredSessionsDisappear) {
    ServiceOptions opt;
    opt.session_ttl = std::chrono::seconds(1);
    AnnotationService service(service_data(), opt);
    const auto id = service.create_session(kConfig).json().at("id").get<std::string>();
    EXPECT_EQ(service.get_curve(id).status, 200);
    std::this_thread::sleep_for(std::chrono::milliseconds(1100));
    EXPECT_EQ(service.get_curve(id).status, 404);
}

TEST(ServiceHttp, LiveServer) {
    AnnotationService service(service_data());
    httplib::Server server;
    service.mount(server);
    const int port = server.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port, 0);
    std::thread runner([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    httplib::Client client("127.0.0.1", port);
    auto created = client.Post("/sessions", kConfig, "application/json");
    ASSERT_TRUE(created);
    EXPECT_EQ(created->status, 201);
    EXPECT_EQ(created->get_header_value("Access-Control-Allow-Origin"), "*");
    const auto id = nlohmann::json::parse(created->body).at("id").get<std::string>();

    auto q = client.Get("/sessions/" + id + "/query");
    ASSERT_TRUE(q);
    ASSERT_EQ(q->status, 200);
    const auto qj = nlohmann::json::parse(q->body);
    auto strip = client.Get(qj.at("strip_url").get<std::string>());
    ASSERT_TRUE(strip);
    EXPECT_EQ(strip->status, 200);
    EXPECT_EQ(strip->get_header_value("Content-Type"), "image/png");

    auto a = client.Post("/sessions/" + id + "/annotation", annotation(qj.at("line_id"), std::nullopt, 1),
                         "application/json");
    ASSERT_TRUE(a);
    EXPECT_EQ(a->status, 200);
    auto c = client.Get("/sessions/" + id + "/curve");
    ASSERT_TRUE(c);
    EXPECT_EQ(nlohmann::json::parse(c->body).at("accuracies").size(), 2u);
    auto missing = client.Get("/sessions/zzz/curve");
    ASSERT_TRUE(missing);
    EXPECT_EQ(missing->status, 404);
    auto pre = client.Options("/sessions");
    ASSERT_TRUE(pre);
    EXPECT_EQ(pre->status, 204);

    server.stop();
    runner.join();
}

}  // namespace
}  // namespace bal
