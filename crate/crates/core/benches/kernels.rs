//! Hot kernels under the active backend. Run once with the default
//! features and once with `--no-default-features` to compare rayon with
//! the sequential fallback; results are grouped per kernel and labelled
//! by backend. With rayon, a single-thread pool is measured as well.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use voxframe::csg::{build_csg, tessellate};
use voxframe::framefem::{DesignBounds, FrameModel, Joint, Material, Member};
use voxframe::par::BACKEND;
use voxframe::topopt::{DensityFilter, FeSolver, LoadSpec, NodeSet, ProblemSpec, SimpMaterial, SolverOptions, SupportSpec, TopOptProblem};
use voxframe::voxmodel::{BinaryVoxelModel, VoxelGrid};

fn cantilever(nx: usize, ny: usize, nz: usize) -> TopOptProblem {
    let (x, y, z) = (nx as f64, ny as f64, nz as f64);
    TopOptProblem::from_spec(&ProblemSpec {
        grid: VoxelGrid::unit([nx, ny, nz]).unwrap(),
        material: SimpMaterial { youngs: 1.0, youngs_min: 1e-9, poisson: 0.3, penalty: 3.0 },
        filter_radius: 3.0,
        volume_fraction: 0.3,
        supports: vec![SupportSpec { nodes: NodeSet { min: [0.0; 3], max: [0.0, y, z] }, dofs: [true; 3] }],
        loads: vec![LoadSpec { nodes: NodeSet { min: [x, y / 2.0, 0.0], max: [x, y / 2.0, z] }, force: [0.0, -1.0, 0.0] }],
        passive: vec![],
    })
    .unwrap()
}

fn ring() -> FrameModel {
    let p = [[0.0, 0.0, 0.0], [20.0, 0.0, 0.0], [20.0, 12.0, 0.0], [0.0, 12.0, 0.0]];
    FrameModel {
        joints: p.iter().map(|&x| Joint::free(x)).collect(),
        members: (0..4).map(|i| Member { joints: [i, (i + 1) % 4], diameter: 2.0 }).collect(),
        material: Material::new(1.0, 0.3),
        volume_target: 1.0,
        bounds: DesignBounds::around(2.0, [0.0; 3], [20.0, 12.0, 1.0]),
    }
}

fn blob(n: usize) -> BinaryVoxelModel {
    let c = n as f64 / 2.0;
    BinaryVoxelModel::from_fn(VoxelGrid::unit([n, n, n]).unwrap(), |i, j, k| {
        let r = [i, j, k].map(|v| v as f64 + 0.5 - c);
        let rho = (r[0] * r[0] + r[1] * r[1]).sqrt();
        (rho - 0.3 * n as f64).powi(2) + r[2] * r[2] < (0.12 * n as f64).powi(2)
    })
}

#[cfg(feature = "parallel")]
type Pool = rayon::ThreadPool;
#[cfg(not(feature = "parallel"))]
struct Pool;

/// Runs `f` inside `pool` when one is given.
fn on<R: Send>(pool: Option<&Pool>, f: impl FnOnce() -> R + Send) -> R {
    match pool {
        #[cfg(feature = "parallel")]
        Some(p) => p.install(f),
        _ => f(),
    }
}

fn kernels(c: &mut Criterion, label: &str, pool: Option<&Pool>) {
    let problem = cantilever(60, 20, 4);
    let solver = FeSolver::new(&problem, SolverOptions::default()).unwrap();
    let moduli = vec![1.0; problem.grid.len()];
    let filter = DensityFilter::new(problem.grid, 3.0);
    let rho: Vec<f64> = (0..problem.grid.len()).map(|i| (i % 7) as f64 / 7.0).collect();
    let tree = build_csg(&ring(), 1.05).unwrap();
    let torus = blob(32);

    let mut g = c.benchmark_group("fe_solve_60x20x4");
    g.sample_size(10);
    g.bench_function(BenchmarkId::from_parameter(label), |b| b.iter(|| on(pool, || solver.solve(black_box(&moduli), None).unwrap())));
    g.finish();

    let mut g = c.benchmark_group("density_filter_60x20x4");
    g.bench_function(BenchmarkId::from_parameter(label), |b| b.iter(|| on(pool, || filter.apply(black_box(&rho)))));
    g.finish();

    let mut g = c.benchmark_group("tessellate_ring_96");
    g.sample_size(10);
    g.bench_function(BenchmarkId::from_parameter(label), |b| b.iter(|| on(pool, || tessellate(black_box(&tree), 96).unwrap())));
    g.finish();

    let mut g = c.benchmark_group("skeletonize_torus_32");
    g.sample_size(10);
    g.bench_function(BenchmarkId::from_parameter(label), |b| b.iter(|| on(pool, || voxframe::skeleton::skeletonize(black_box(&torus)))));
    g.finish();
}

fn backends(c: &mut Criterion) {
    kernels(c, BACKEND, None);
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        kernels(c, "rayon-1-thread", Some(&pool));
    }
}

criterion_group!(benches, backends);
criterion_main!(benches);
