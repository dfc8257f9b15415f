use crate::data::{ClusteredDataset, Record};

/// Dataset from `(cluster, time, status, covariates)` rows.
pub(crate) fn dataset(rows: &[(u64, f64, bool, Vec<f64>)]) -> ClusteredDataset {
    let mut seen = std::collections::HashMap::new();
    let records = rows
        .iter()
        .map(|(c, t, s, z)| {
            let m = seen.entry(*c).or_insert(0u32);
            *m += 1;
            Record {
                cluster: *c,
                member: *m,
                time: *t,
                status: *s,
                covariates: z.clone(),
            }
        })
        .collect();
    ClusteredDataset::new(records, None).unwrap()
}

/// One observation per cluster.
pub(crate) fn singletons(times: &[f64], status: &[bool], z: &[f64]) -> ClusteredDataset {
    let rows: Vec<_> = (0..times.len()).map(|i| (i as u64 + 1, times[i], status[i], vec![z[i]])).collect();
    dataset(&rows)
}
