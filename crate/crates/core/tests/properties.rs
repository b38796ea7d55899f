mod common;

use common::*;
use meshfim_core::detect::dbscan;
use meshfim_core::mesh::{parse_obj, write_obj, FaceAdjacencyGraph, Mesh, Similarity};
use meshfim_core::metrics::{overflow_ratio, vertex_matching_ratio};
use meshfim_core::region::{extract_context, grow_percolation, sample_bfs_region};
use meshfim_core::repair::{quality_gate_merge, GateConfig, MergeOutcome};
use meshfim_core::tokenizer::{
    canonical_sort, detokenize, serialize_fim, FimSequence, QuantizationSpec, FLAG_BOUNDARY, FLAG_CONTEXT,
};
use meshfim_core::{synth, FaceSet, Point};
use proptest::prelude::*;

fn token_mesh(faces: usize, seed: u64) -> Mesh {
    let mesh = synth::random_mixed_mesh(faces, seed);
    Similarity::fit_unit_sphere(mesh.vertices.iter()).unwrap().then_scale(0.5).apply_mesh(&mesh)
}

fn region_of(mesh: &Mesh, pick: usize, budget: usize, w: usize) -> meshfim_core::region::RegionSpec {
    let g = FaceAdjacencyGraph::build(mesh);
    sample_bfs_region(mesh, &g, pick % mesh.faces.len(), budget, w).unwrap()
}

fn cloud() -> impl Strategy<Value = Vec<Point>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64), 0..120)
        .prop_map(|v| v.into_iter().map(|(x, y, z)| Point::new(x, y, z)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sequence_layout_holds(faces in 2usize..200, seed in any::<u64>(), pick in any::<usize>(), budget in 1usize..60, w in 0usize..4) {
        let mesh = token_mesh(faces, seed);
        let region = region_of(&mesh, pick, budget, w);
        let spec = QuantizationSpec::default();
        let seq = serialize_fim(&mesh, &region.context, &region.target, &region.boundary, &spec).unwrap();
        let s = spec.sentinels();
        prop_assert_eq!(seq.tokens.iter().filter(|&&t| t == s.s_ctx).count(), 1);
        prop_assert_eq!(seq.tokens.iter().filter(|&&t| t == s.e_ctx).count(), 1);
        prop_assert_eq!(seq.tokens.iter().filter(|&&t| t == s.eos).count(), 1);
        let positions: Vec<u32> = seq.ctx_pos.iter().flatten().copied().collect();
        prop_assert_eq!(positions, (0..12 * region.context.len() as u32).collect::<Vec<_>>());
        for (i, &f) in seq.flags.iter().enumerate() {
            prop_assert_eq!(f & FLAG_CONTEXT != 0, seq.ctx_pos[i].is_some());
            if f & FLAG_BOUNDARY != 0 {
                prop_assert!(f & FLAG_CONTEXT != 0);
            }
        }
        let det = detokenize(&seq).unwrap();
        prop_assert_eq!(det.context.len(), region.context.len());
        prop_assert_eq!(det.target.len(), region.target.len());
    }

    #[test]
    fn wire_formats_round_trip(faces in 2usize..120, seed in any::<u64>(), pick in any::<usize>(), budget in 1usize..40) {
        let mesh = token_mesh(faces, seed);
        let region = region_of(&mesh, pick, budget, 1);
        let seq = serialize_fim(&mesh, &region.context, &region.target, &region.boundary, &QuantizationSpec::default()).unwrap();
        prop_assert_eq!(&FimSequence::from_json_line(&seq.to_json_line()).unwrap(), &seq);
        let mut buf = Vec::new();
        seq.write_binary(&mut buf).unwrap();
        prop_assert_eq!(&FimSequence::read_binary(buf.as_slice()).unwrap(), &seq);
    }

    #[test]
    fn quantization_error_is_half_a_bin(x in -0.5..0.5f64, bins in 2u32..4096) {
        let spec = QuantizationSpec::with_bins(bins);
        let t = spec.quantize(x).unwrap();
        prop_assert!(t < bins);
        prop_assert!((spec.dequantize(t) - x).abs() <= spec.bin_width() / 2.0 + 1e-12);
    }

    #[test]
    fn canonical_sort_is_idempotent(faces in 1usize..150, seed in any::<u64>()) {
        let mesh = token_mesh(faces, seed);
        let spec = QuantizationSpec::default();
        let once = canonical_sort(&mesh, &spec).unwrap();
        prop_assert_eq!(&canonical_sort(&once, &spec).unwrap(), &once);
    }

    #[test]
    fn obj_round_trip(faces in 1usize..150, seed in any::<u64>()) {
        let mesh = synth::random_mixed_mesh(faces, seed);
        let text = write_obj(&mesh);
        let back = parse_obj(&text).unwrap();
        prop_assert_eq!(&back.faces, &mesh.faces);
        for (a, b) in back.vertices.iter().zip(&mesh.vertices) {
            prop_assert!((a - b).amax() <= 1e-8 * (1.0 + b.coords.amax()));
        }
        // nine significant digits survive a second pass unchanged
        prop_assert_eq!(write_obj(&back), text);
    }

    #[test]
    fn similarity_inverts(x in -50.0..50.0f64, y in -50.0..50.0f64, z in -50.0..50.0f64, s in 0.01..100.0f64) {
        let t = Similarity { center: [x, -y, z * 0.5], scale: s };
        let p = Point::new(y, z, x);
        prop_assert!((t.invert(&t.apply(&p)) - p).norm() <= 1e-9 * (1.0 + p.coords.norm()));
    }

    #[test]
    fn context_rings_hug_the_target(faces in 4usize..200, seed in any::<u64>(), pick in any::<usize>(), budget in 1usize..50, w in 0usize..4) {
        let mesh = synth::random_mixed_mesh(faces, seed);
        let g = FaceAdjacencyGraph::build(&mesh);
        let nb = brute_neighbours(&mesh);
        let region = region_of(&mesh, pick, budget, w);
        prop_assert!(region.target.is_disjoint(&region.context));
        prop_assert!(brute_connected(&nb, &region.target));
        prop_assert_eq!(&region.boundary, &brute_boundary(&mesh, &region.target));
        // ring distance of every context face is 1..=w
        let mut dist = vec![usize::MAX; mesh.faces.len()];
        for &t in &region.target {
            for (f, d) in bfs_distance(&nb, t).into_iter().enumerate() {
                if let Some(d) = d {
                    dist[f] = dist[f].min(d);
                }
            }
        }
        let expected: FaceSet = (0..mesh.faces.len()).filter(|&f| dist[f] >= 1 && dist[f] <= w).collect();
        prop_assert_eq!(&region.context, &expected);
        let again = extract_context(&mesh, &g, &region.target, w).unwrap();
        prop_assert_eq!(again.context, region.context);
    }

    #[test]
    fn percolation_stays_connected(seed in any::<u64>(), pick in any::<usize>(), p in 0.05..1.0f64, budget in 1usize..300) {
        let mesh = synth::cube_sphere(6, 1.0);
        let g = FaceAdjacencyGraph::build(&mesh);
        let region = grow_percolation(&g, pick % mesh.faces.len(), p, budget, seed).unwrap();
        prop_assert!(brute_connected(&brute_neighbours(&mesh), &region));
        prop_assert_eq!(region.len(), budget.min(mesh.faces.len()));
    }

    #[test]
    fn ratios_stay_in_unit_interval(points in cloud(), other in cloud(), seed in any::<u64>()) {
        let residual = synth::random_mixed_mesh(30, seed);
        let o = overflow_ratio(&points, &residual, 0.05);
        prop_assert!((0.0..=1.0).contains(&o));
        let r = vertex_matching_ratio(&points, &other, 0.1);
        prop_assert!((0.0..=1.0).contains(&r));
    }

    #[test]
    fn dbscan_matches_brute_force(points in cloud(), eps in 0.05..0.6f64, min_pts in 1usize..7) {
        let fast = dbscan(&points, eps, min_pts).unwrap();
        prop_assert!(same_partition(&fast, &brute_dbscan(&points, eps, min_pts)));
    }

    #[test]
    fn ground_truth_patch_restores_face_count(pick in any::<usize>(), budget in 1usize..40, w in 1usize..3) {
        let mesh = synth::cube_sphere(6, 1.0);
        let region = region_of(&mesh, pick, budget, w);
        if region.target.len() * 2 > mesh.faces.len() {
            return Ok(());
        }
        let patch = mesh.submesh(&region.target);
        let cfg = GateConfig { samples: 2000, ..Default::default() };
        let out = quality_gate_merge(&mesh, &region.target, &region.context, &patch, &cfg).unwrap();
        let MergeOutcome::Merged { mesh: merged, welded, .. } = out else {
            return Err(TestCaseError::fail("ground truth rejected"));
        };
        prop_assert_eq!(merged.faces.len(), mesh.faces.len());
        prop_assert_eq!(welded, region.boundary.len());
        let closed = meshfim_core::mesh::edge_incidence(&merged.compacted().0).values().all(|&n| n == 2);
        prop_assert!(closed);
    }
}
