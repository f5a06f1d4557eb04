use proptest::prelude::*;
use superpart_core::cloud_io::ply::{read_vertex_table, write_vertex_table, Column, Encoding, ScalarType, VertexTable};
use superpart_core::cloud_io::{read_cloud, write_cloud_with_scalars, CloudFormat, PropertyMap};
use superpart_core::hierarchy::{read_sph1, write_sph1, Sph1};
use superpart_core::kernel::network::{init_params, KernelConfig, ModelShape};
use superpart_core::kernel::params::{from_blob, load_params, save_params, to_blob};
use superpart_core::pipeline::{run_pipeline, PipelineConfig};
use superpart_core::synthetic::{room_scene, SceneConfig};

fn column(name: String) -> impl Strategy<Value = (String, ScalarType)> {
    prop_oneof![
        Just(ScalarType::I8),
        Just(ScalarType::U8),
        Just(ScalarType::I16),
        Just(ScalarType::U16),
        Just(ScalarType::I32),
        Just(ScalarType::U32),
        Just(ScalarType::F32),
        Just(ScalarType::F64),
    ]
    .prop_map(move |ty| (name.clone(), ty))
}

fn value(ty: ScalarType) -> BoxedStrategy<f64> {
    match ty {
        ScalarType::I8 => any::<i8>().prop_map(f64::from).boxed(),
        ScalarType::U8 => any::<u8>().prop_map(f64::from).boxed(),
        ScalarType::I16 => any::<i16>().prop_map(f64::from).boxed(),
        ScalarType::U16 => any::<u16>().prop_map(f64::from).boxed(),
        ScalarType::I32 => any::<i32>().prop_map(f64::from).boxed(),
        ScalarType::U32 => any::<u32>().prop_map(f64::from).boxed(),
        ScalarType::F32 => proptest::num::f32::NORMAL.prop_map(f64::from).boxed(),
        ScalarType::F64 => proptest::num::f64::NORMAL.boxed(),
    }
}

fn table() -> impl Strategy<Value = VertexTable> {
    let names = vec!["x", "y", "z", "red", "label", "intensity"];
    (
        proptest::collection::vec(0usize..names.len(), 1..5).prop_flat_map(move |picks| {
            let mut seen = Vec::new();
            for p in picks {
                if !seen.contains(&p) {
                    seen.push(p);
                }
            }
            seen.into_iter().map(|p| column(names[p].to_string())).collect::<Vec<_>>()
        }),
        0usize..30,
    )
        .prop_flat_map(|(cols, count)| {
            cols.into_iter()
                .map(|(name, ty)| {
                    proptest::collection::vec(value(ty), count)
                        .prop_map(move |values| Column { name: name.clone(), ty, values })
                })
                .collect::<Vec<_>>()
                .prop_map(move |columns| VertexTable { count, columns })
        })
}

fn bits(t: &VertexTable) -> Vec<(String, ScalarType, Vec<u64>)> {
    t.columns.iter().map(|c| (c.name.clone(), c.ty, c.values.iter().map(|v| v.to_bits()).collect())).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn ply_tables_roundtrip_bit_exact(t in table(), binary in any::<bool>()) {
        let enc = if binary { Encoding::BinaryLittleEndian } else { Encoding::Ascii };
        let mut a = Vec::new();
        write_vertex_table(&mut a, &t, enc).unwrap();
        let back = read_vertex_table(a.as_slice()).unwrap();
        prop_assert_eq!(back.count, t.count);
        prop_assert_eq!(bits(&back), bits(&t));
        let mut b = Vec::new();
        write_vertex_table(&mut b, &back, enc).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn truncated_binary_ply_is_rejected(t in table(), cut in 1usize..64) {
        prop_assume!(t.count > 0);
        let mut a = Vec::new();
        write_vertex_table(&mut a, &t, Encoding::BinaryLittleEndian).unwrap();
        let len = a.len() - cut.min(a.len() - 1);
        // cutting into the body must error, never panic
        let header_end = a.windows(11).position(|w| w == b"end_header\n").unwrap() + 11;
        prop_assume!(len > header_end && len < a.len());
        prop_assert!(read_vertex_table(&a[..len]).is_err());
    }
}

#[test]
fn pipeline_output_roundtrips_through_sph1_file() {
    let cloud = room_scene(&SceneConfig::with_points(6_000, 4));
    let cfg = PipelineConfig { voxel: 0.05, ..Default::default() };
    let out = run_pipeline(&cloud, &cfg).unwrap();
    let mut data = Sph1::new(out.cloud.positions.clone(), out.cloud.labels.clone(), out.hierarchy.clone());
    for g in &out.graphs {
        data.graphs[g.level - 1] = Some(g.clone());
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scene.sph1");
    write_sph1(&mut std::fs::File::create(&path).unwrap(), &data).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    let back = read_sph1(bytes.as_slice()).unwrap();

    // integer content is exact, floats are stored as f32
    let (a, b) = (&data.hierarchy, &back.hierarchy);
    assert_eq!(a.level_count(), b.level_count());
    assert_eq!(a.feature_dim(), b.feature_dim());
    for (x, y) in a.levels().iter().zip(b.levels()) {
        assert_eq!(x.super_index, y.super_index);
        assert_eq!(x.point_counts, y.point_counts);
        for (u, v) in x.mean_features.iter().zip(&y.mean_features) {
            assert_eq!(*u as f32, *v as f32);
        }
        for (u, v) in x.radii.iter().zip(&y.radii) {
            assert_eq!(*u as f32, *v as f32);
        }
    }
    assert_eq!(back.labels, data.labels);
    for (g, h) in data.graphs.iter().zip(&back.graphs) {
        match (g, h) {
            (Some(g), Some(h)) => {
                assert_eq!(g.edges, h.edges);
                assert_eq!(g.features.len(), h.features.len());
            }
            (None, None) => {}
            _ => panic!("graph presence changed"),
        }
    }
    let mut again = Vec::new();
    write_sph1(&mut again, &back).unwrap();
    assert_eq!(again, bytes);

    for len in (0..bytes.len()).step_by(bytes.len() / 97 + 1) {
        assert!(read_sph1(&bytes[..len]).is_err(), "prefix of {len} bytes accepted");
    }
}

#[test]
fn params_survive_save_and_load() {
    let cfg = KernelConfig::tiny(9);
    let shape = ModelShape { point_feature_dim: 7, num_classes: 5, level_count: 2 };
    let params = init_params(&cfg, shape).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let stem = dir.path().join("model");
    save_params(&params, &stem).unwrap();
    let back = load_params(&stem).unwrap();
    assert_eq!(to_blob(&back), to_blob(&params));

    let (blob, manifest) = to_blob(&params);
    assert!(from_blob(&blob[..blob.len() - 8], &manifest).is_err());
    assert!(from_blob(&blob, &manifest.replace("f64-le", "f32-le")).is_err());
    assert!(from_blob(&blob, "{").is_err());
    assert!(load_params(dir.path().join("missing")).is_err());
}

#[test]
fn cloud_with_extra_scalars_reads_back() {
    let cloud = room_scene(&SceneConfig::with_points(500, 2));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.ply");
    let scalar: Vec<f64> = (0..cloud.len()).map(|i| i as f64 * 0.5).collect();
    write_cloud_with_scalars(&cloud, &[("score", &scalar)], &path, CloudFormat::PlyBinary).unwrap();
    let table = read_vertex_table(std::io::BufReader::new(std::fs::File::open(&path).unwrap())).unwrap();
    let col = table.column("score").unwrap();
    assert!(col.values.iter().zip(&scalar).all(|(a, b)| *a as f32 == *b as f32));
    let back = read_cloud(&path, &PropertyMap::default()).unwrap();
    assert_eq!(back.len(), cloud.len());
    assert_eq!(back.labels, cloud.labels);
}
