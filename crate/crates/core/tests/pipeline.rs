use chrono::{Duration, NaiveDate};
use stigmergy_core::hotspot::{
    build_slot_trails, extract_hotspots, Hotspot, HotspotConfig, Polygon, SlotTrailConfig,
};
use stigmergy_core::ingest::{
    bucketize, hotspot_activity, spatial_batches, Endpoint, GeoBox, TripRecord,
};
use stigmergy_core::stigspace::Trail2D;
use stigmergy_core::synth::{planted_layout, synthetic_trips, PlantedConfig, TripConfig};

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn square(cx: f64, cy: f64, half: f64) -> Polygon {
    Polygon {
        outer: vec![
            (cx - half, cy - half),
            (cx + half, cy - half),
            (cx + half, cy + half),
            (cx - half, cy + half),
        ],
        holes: Vec::new(),
    }
}

#[test]
fn planted_sinusoid_is_recovered_inside_its_polygon() {
    let geo = GeoBox::manhattan();
    let day = NaiveDate::from_ymd_opt(2015, 3, 4).unwrap();
    let midnight = day.and_hms_opt(0, 0, 0).unwrap();
    let plant: Vec<f64> = (0..288)
        .map(|b| 20.0 + 15.0 * (2.0 * std::f64::consts::PI * b as f64 / 288.0).sin())
        .collect();
    let mut trips = Vec::new();
    for (b, &rate) in plant.iter().enumerate() {
        for k in 0..rate.round() as usize {
            let t = midnight
                + Duration::minutes(5 * b as i64)
                + Duration::seconds((k * 7 % 300) as i64);
            let (x, y) = (
                -300.0 + (k as f64 * 37.0) % 600.0,
                -300.0 + (k as f64 * 53.0) % 600.0,
            );
            let (lon, lat) = geo.unproject(x, y);
            let (dlon, dlat) = geo.unproject(x + 3000.0, y + 3000.0);
            trips.push(TripRecord {
                taxi_id: format!("T{k}"),
                passenger_count: 1,
                pickup: Endpoint { time: t, lon, lat },
                dropoff: Endpoint {
                    time: t,
                    lon: dlon,
                    lat: dlat,
                },
            });
        }
    }
    let grid = bucketize(&trips, geo);
    let hotspot = Hotspot {
        id: "A".into(),
        polygon: square(0.0, 0.0, 400.0),
        slot_coverage: Vec::new(),
    };
    let series = hotspot_activity(&grid, &hotspot, day, 10).unwrap();
    let expected: Vec<f64> = plant
        .chunks(2)
        .map(|c| c.iter().map(|r| r.round()).sum())
        .collect();
    let r = pearson(series.samples(), &expected);
    assert!(r > 0.99, "correlation {r}");
}

#[test]
fn planted_clusters_survive_the_trip_path() {
    let geo = GeoBox::manhattan();
    let layout = planted_layout(&PlantedConfig::default()).unwrap();
    let cfg = TripConfig::default();
    let trips = synthetic_trips(&layout, &geo, &cfg);
    let buckets = bucketize(&trips, geo);
    let grid = Trail2D::enclosing(&geo.projected(), 50.0).unwrap();
    let days: Vec<NaiveDate> = (0..cfg.days)
        .map(|d| cfg.start + chrono::Days::new(d as u64))
        .collect();
    let batches = spatial_batches(&buckets, &days, &grid);
    let trails = build_slot_trails(&grid, &batches, &SlotTrailConfig::default()).unwrap();
    let hotspots = extract_hotspots(&trails, &HotspotConfig::default()).unwrap();
    assert_eq!(hotspots.len(), layout.centers.len());
    for &(x, y) in &layout.centers {
        assert_eq!(
            hotspots.iter().filter(|h| h.polygon.contains(x, y)).count(),
            1,
            "center ({x}, {y})"
        );
    }
}
