use super::{ols_fit, Design, OlsResult, SeKind};
use serde::Serialize;

/// A named partition: each group is a label and a row mask.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSpec {
    pub split: String,
    pub groups: Vec<(String, Vec<bool>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubgroupResult {
    pub split: String,
    pub group: String,
    pub n: usize,
    pub estimate: Option<OlsResult>,
    /// Why estimation failed, if it did.
    pub error: Option<String>,
}

/// One clustered regression per group; failures are recorded per group.
pub fn subgroup_regressions(y: &[f64], design: &Design, clusters: &[String], splits: &[GroupSpec]) -> Vec<SubgroupResult> {
    let mut out = Vec::new();
    for spec in splits {
        for (label, mask) in &spec.groups {
            let rows: Vec<usize> = mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect();
            let sub_y: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
            let sub_c: Vec<String> = rows.iter().map(|&i| clusters[i].clone()).collect();
            let result = ols_fit(&sub_y, &design.select_rows(&rows), SeKind::Cluster, Some(&sub_c));
            let (estimate, error) = match result {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            out.push(SubgroupResult { split: spec.split.clone(), group: label.clone(), n: rows.len(), estimate, error });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clusters(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{}", i / 2)).collect()
    }

    #[test]
    fn all_true_split_equals_full_sample() {
        let x: Vec<f64> = (0..30).map(|i| (i as f64 * 0.7).cos()).collect();
        let y: Vec<f64> = (0..30).map(|i| 1.0 + x[i] + (i % 4) as f64 * 0.1).collect();
        let d = Design::with_intercept(&[("x", &x)]);
        let c = clusters(30);
        let split = GroupSpec { split: "all".into(), groups: vec![("yes".into(), vec![true; 30])] };
        let res = subgroup_regressions(&y, &d, &c, &[split]);
        let full = ols_fit(&y, &d, SeKind::Cluster, Some(&c)).unwrap();
        assert_eq!(res[0].estimate.as_ref().unwrap().coefficients, full.coefficients);
    }

    #[test]
    fn opposite_slopes_within_groups() {
        // Pooled covariance zero by construction, slopes ±1 within groups.
        let mut x = Vec::new();
        let mut y = Vec::new();
        let mut g = Vec::new();
        for i in 0..20 {
            let v = i as f64 - 9.5;
            x.push(v);
            y.push(v);
            g.push(true);
            x.push(v);
            y.push(-v);
            g.push(false);
        }
        let d = Design::with_intercept(&[("x", &x)]);
        let pooled = ols_fit(&y, &d, SeKind::Classical, None).unwrap();
        assert!(pooled.get("x").unwrap().estimate.abs() < 1e-12);
        let not_g: Vec<bool> = g.iter().map(|v| !v).collect();
        let split = GroupSpec { split: "side".into(), groups: vec![("a".into(), g), ("b".into(), not_g)] };
        let ids: Vec<String> = (0..40).map(|i| i.to_string()).collect();
        let res = subgroup_regressions(&y, &d, &ids, &[split]);
        let a = res[0].estimate.as_ref().unwrap().get("x").unwrap().estimate;
        let b = res[1].estimate.as_ref().unwrap().get("x").unwrap().estimate;
        assert!(a > 0.0 && b < 0.0);
    }

    #[test]
    fn tiny_group_fails_alone() {
        let x: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| v * 0.5 + (v * 1.3).sin()).collect();
        let d = Design::with_intercept(&[("x", &x)]);
        let small: Vec<bool> = (0..12).map(|i| i == 0).collect();
        let big: Vec<bool> = (0..12).map(|i| i != 0).collect();
        let split = GroupSpec { split: "s".into(), groups: vec![("small".into(), small), ("big".into(), big)] };
        let res = subgroup_regressions(&y, &d, &clusters(12), &[split]);
        assert!(res[0].estimate.is_none() && res[0].error.is_some());
        assert!(res[1].estimate.is_some());
    }
}
