#include <catch2/catch_amalgamated.hpp>

#include <lisgan/lisgan.hpp>

using namespace lisgan;

TEST_CASE("tiny end-to-end run finishes and logs") {
    TrainConfig cfg;
    cfg.arch = Arch::g_lis;
    cfg.n_r = 2;
    cfg.n_z = 4;
    cfg.batch_size = 8;
    cfg.phases = {{6, 0.0005}};
    cfg.task = Task::ring;
    cfg.log_every = 3;
    cfg.seed = 7;
    RunState st = train(cfg);
    REQUIRE(st.batch == 6);
    REQUIRE(st.metrics.rows().size() == 2);
    REQUIRE(st.metrics.columns().size() == 2 + 3 + 3 + 2);
    for (const auto& row : st.metrics.rows())
        for (double v : row) REQUIRE(std::isfinite(v));
}

TEST_CASE("iterative reverser run finishes") {
    TrainConfig cfg;
    cfg.arch = Arch::r_iterative;
    cfg.n_r = 2;
    cfg.n_z = 4;
    cfg.batch_size = 8;
    cfg.phases = {{4, 0.0005}};
    cfg.task = Task::ring;
    cfg.log_every = 2;
    cfg.seed = 3;
    RunState st = train(cfg);
    REQUIRE(st.batch == 4);
    REQUIRE(st.metrics.rows().size() == 2);
}
