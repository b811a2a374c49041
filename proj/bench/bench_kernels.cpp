#include <benchmark/benchmark.h>

#include <random>

#include "forge/body_io.hpp"
#include "forge/body_model.hpp"
#include "forge/camera.hpp"
#include "forge/kernels.hpp"
#include "forge/renderer.hpp"

using namespace forge;

namespace {

const ParametricBody& body() {
    static const ParametricBody b = generate_test_humanoid(96);
    return b;
}

std::vector<Points> random_basis(Eigen::Index n, int count) {
    std::mt19937_64 gen(11);
    std::normal_distribution<double> d;
    std::vector<Points> basis(static_cast<std::size_t>(count), Points(n, 3));
    for (Points& p : basis)
        for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = d(gen);
    return basis;
}

struct SkinInput {
    SkinningTransforms transforms;
    Points vertices;
};

const SkinInput& skin_input() {
    static const SkinInput in = [] {
        const ParametricBody& b = body();
        std::mt19937_64 gen(12);
        std::normal_distribution<double> d(0.0, 0.3);
        JointRotations pose(b.num_joints(), 3);
        for (Eigen::Index i = 0; i < pose.size(); ++i) pose.data()[i] = d(gen);
        const Points joints = compute_joints(b, b.template_vertices);
        return SkinInput{skinning_transforms(b, joints, pose), b.template_vertices};
    }();
    return in;
}

std::vector<ScreenTriangle> triangles(int size) {
    CameraParams cam;
    cam.width = size;
    cam.height = size;
    cam.look_at = Vector3d(0.0, 0.9, 0.0);
    cam.distance = 2.8;
    cam.azimuth_deg = 30.0;
    return project_triangles(body().template_vertices, body().faces, cam);
}

template <auto Kernel>
void bm_accumulate_basis(benchmark::State& state) {
    const Eigen::Index n = body().num_vertices();
    const auto basis = random_basis(n, static_cast<int>(state.range(0)));
    const Eigen::VectorXd coeffs = Eigen::VectorXd::LinSpaced(state.range(0), -1.0, 1.0);
    Points out = Points::Zero(n, 3);
    for (auto _ : state) {
        Kernel(out, basis, coeffs);
        benchmark::DoNotOptimize(out.data());
    }
}

template <auto Kernel>
void bm_skin(benchmark::State& state) {
    const SkinInput& in = skin_input();
    Points out(in.vertices.rows(), 3);
    for (auto _ : state) {
        Kernel(body().skinning_weights, in.transforms, in.vertices, out);
        benchmark::DoNotOptimize(out.data());
    }
}

template <auto Kernel>
void bm_rasterize(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    const auto tris = triangles(size);
    for (auto _ : state) {
        FragmentBuffer frags(size, size);
        Kernel(tris, frags);
        benchmark::DoNotOptimize(frags.face_id.data());
    }
}

}  // namespace

BENCHMARK(bm_accumulate_basis<kernels::serial::accumulate_basis>)->Name("accumulate_basis/serial")->Arg(10)->Arg(64);
BENCHMARK(bm_accumulate_basis<kernels::omp::accumulate_basis>)->Name("accumulate_basis/omp")->Arg(10)->Arg(64)->UseRealTime();
BENCHMARK(bm_skin<kernels::serial::skin>)->Name("skin/serial");
BENCHMARK(bm_skin<kernels::omp::skin>)->Name("skin/omp")->UseRealTime();
BENCHMARK(bm_rasterize<kernels::serial::rasterize>)->Name("rasterize/serial")->Arg(64)->Arg(512);
BENCHMARK(bm_rasterize<kernels::omp::rasterize>)->Name("rasterize/omp")->Arg(64)->Arg(512)->UseRealTime();

BENCHMARK_MAIN();
