// Shows what the residual input modules do to noise vectors: draws a batch,
// pushes it through each refinement stage, and prints displacement stats,
// an interpolation walk, and a perturbation group around one vector.

#include <cstdio>

#include <lisgan/lisgan.hpp>

using namespace lisgan;

int main() {
    // A fresh two-module generator; modules start at identity, so a few
    // training-free gradient steps are simulated by scrambling them lightly.
    Rng init(5, Stream::init);
    NetworkParams g = build_network(make_ring_generator_spec(8, 2), init);
    Rng scramble(6, Stream::init);
    for (auto& m : g.modules) {
        auto& fc = std::get<FcLayer>(m.fc2.op);
        std::vector<Param*> ps{&fc.w};
        if (fc.has_g()) ps.push_back(&fc.g);
        if (fc.has_bias()) ps.push_back(&fc.b);
        for (Param* p : ps)
            for (std::int64_t i = 0; i < p->value.numel(); ++i)
                p->value[i] = static_cast<float>(scramble.normal(0.0, 0.05));
    }

    Rng noise(7, Stream::noise);
    NoiseBatch z = sample_noise(Prior::normal, 512, g.spec.n_z, noise);
    GenResult full = generator_forward(g, z.values);

    DisplacementStats ds = displacement_stats(z.values, full.z_primes);
    std::printf("squared displacement per module (512 vectors, n_z = %d):\n", g.spec.n_z);
    for (std::size_t k = 0; k < ds.mean_sq.size(); ++k)
        std::printf("  after module %zu: mean %.5f, max %.5f\n", k + 1, ds.mean_sq[k], ds.max_sq[k]);

    auto hists = component_histograms(z.values, full.z_primes.back(), 8);
    std::printf("component 0 density before/after manipulation:\n");
    const ComponentHistogram& h = hists[0];
    for (std::size_t b = 0; b < h.density_before.size(); ++b)
        std::printf("  bin %zu [%6.2f, %6.2f): %.3f -> %.3f\n", b,
                    h.lo + static_cast<double>(b) * (h.hi - h.lo) / 8.0,
                    h.lo + static_cast<double>(b + 1) * (h.hi - h.lo) / 8.0,
                    h.density_before[b], h.density_after[b]);

    // A straight line in noise space maps to a path in sample space.
    Tensor za({g.spec.n_z}), zb({g.spec.n_z});
    Rng ends(8, Stream::noise);
    for (int j = 0; j < g.spec.n_z; ++j) {
        za[j] = static_cast<float>(ends.normal());
        zb[j] = static_cast<float>(ends.normal());
    }
    Tensor walk = interpolate(za, zb, 10);
    Tensor pts = generator_forward(g, walk).out;
    std::printf("interpolation walk (10 steps, endpoints included):\n");
    for (int i = 0; i < pts.dim(0); ++i)
        std::printf("  step %d: (%.4f, %.4f)\n", i, pts.at2(i, 0), pts.at2(i, 1));

    Rng jitter(9, Stream::noise);
    Tensor group = perturb(za, 64, 0.2, jitter);
    Tensor cloud = generator_forward(g, group).out;
    float mx = 0.0f, my = 0.0f;
    for (int i = 0; i < cloud.dim(0); ++i) {
        mx += cloud.at2(i, 0);
        my += cloud.at2(i, 1);
    }
    std::printf("perturbation group of %d around one vector: centroid (%.4f, %.4f)\n",
                cloud.dim(0), mx / cloud.dim(0), my / cloud.dim(0));
    return 0;
}
