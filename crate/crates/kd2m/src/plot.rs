//! Feature-alignment scatter plots: shared PCA projection of teacher and
//! student feature clouds, rendered as a standalone SVG with a fixed
//! 600 x 600 viewport. Teacher points are red, student points blue.

use crate::error::{Error, Result};
use crate::linalg::{self, SymMatrix};
use ndarray::{Array1, Array2};

const VIEW: f64 = 600.0;
const MARGIN: f64 = 50.0;

/// 2-D coordinates for both clouds plus axis labels.
#[derive(Debug, Clone)]
pub struct Projection {
    pub teacher: Array2<f64>,
    pub student: Array2<f64>,
    pub x_label: String,
    pub y_label: String,
}

/// Project both clouds into 2-D with one shared map: identity for d = 2,
/// zero-padding for d = 1, and PCA fitted on the union for d > 2 (axis
/// labels then carry the explained variance).
pub fn project_clouds(teacher_z: &Array2<f64>, student_z: &Array2<f64>) -> Result<Projection> {
    if teacher_z.ncols() != student_z.ncols() {
        return Err(Error::shape("latent dims", teacher_z.ncols(), student_z.ncols()));
    }
    if teacher_z.nrows() == 0 || student_z.nrows() == 0 {
        return Err(Error::Config("empty feature cloud".into()));
    }
    let d = teacher_z.ncols();
    match d {
        1 => {
            let pad = |z: &Array2<f64>| {
                let mut out = Array2::zeros((z.nrows(), 2));
                for i in 0..z.nrows() {
                    out[[i, 0]] = z[[i, 0]];
                }
                out
            };
            Ok(Projection {
                teacher: pad(teacher_z),
                student: pad(student_z),
                x_label: "z0".into(),
                y_label: "".into(),
            })
        }
        2 => Ok(Projection {
            teacher: teacher_z.clone(),
            student: student_z.clone(),
            x_label: "z0".into(),
            y_label: "z1".into(),
        }),
        _ => {
            let n_total = teacher_z.nrows() + student_z.nrows();
            let mut mean = Array1::<f64>::zeros(d);
            for z in [teacher_z, student_z] {
                for row in z.rows() {
                    for k in 0..d {
                        mean[k] += row[k];
                    }
                }
            }
            mean.mapv_inplace(|v| v / n_total as f64);

            let mut cov = Array2::<f64>::zeros((d, d));
            for z in [teacher_z, student_z] {
                for row in z.rows() {
                    for a in 0..d {
                        let da = row[a] - mean[a];
                        for b in a..d {
                            cov[[a, b]] += da * (row[b] - mean[b]);
                        }
                    }
                }
            }
            for a in 0..d {
                for b in a..d {
                    cov[[a, b]] /= n_total as f64;
                    cov[[b, a]] = cov[[a, b]];
                }
            }
            let eig = linalg::sym_eig(&SymMatrix::new(cov)?)?;
            let total_var: f64 = eig.values.iter().map(|&l| l.max(0.0)).sum();
            let mut components = Array2::zeros((d, 2));
            let mut explained = [0.0f64; 2];
            for pc in 0..2 {
                let mut col: Vec<f64> = (0..d).map(|k| eig.vectors[[k, pc]]).collect();
                // canonical sign: the largest-magnitude entry is positive
                let lead = (0..d).fold(0usize, |best, k| {
                    if col[k].abs() > col[best].abs() {
                        k
                    } else {
                        best
                    }
                });
                if col[lead] < 0.0 {
                    col.iter_mut().for_each(|v| *v = -*v);
                }
                for k in 0..d {
                    components[[k, pc]] = col[k];
                }
                explained[pc] = if total_var > 0.0 {
                    eig.values[pc].max(0.0) / total_var
                } else {
                    0.0
                };
            }
            let project = |z: &Array2<f64>| {
                let mut out = Array2::zeros((z.nrows(), 2));
                for (i, row) in z.rows().into_iter().enumerate() {
                    for pc in 0..2 {
                        let mut acc = 0.0;
                        for k in 0..d {
                            acc += (row[k] - mean[k]) * components[[k, pc]];
                        }
                        out[[i, pc]] = acc;
                    }
                }
                out
            };
            Ok(Projection {
                teacher: project(teacher_z),
                student: project(student_z),
                x_label: format!("PC1 ({:.1}% var)", 100.0 * explained[0]),
                y_label: format!("PC2 ({:.1}% var)", 100.0 * explained[1]),
            })
        }
    }
}

/// Render the projection as an SVG scatter. Both clouds share one
/// data-to-pixel transform, so identical clouds land on identical pixels.
pub fn render_scatter_svg(projection: &Projection, title: &str) -> String {
    let mut min_x = f64::INFINITY;
    let mut max_x = f64::NEG_INFINITY;
    let mut min_y = f64::INFINITY;
    let mut max_y = f64::NEG_INFINITY;
    for cloud in [&projection.teacher, &projection.student] {
        for row in cloud.rows() {
            min_x = min_x.min(row[0]);
            max_x = max_x.max(row[0]);
            min_y = min_y.min(row[1]);
            max_y = max_y.max(row[1]);
        }
    }
    let span_x = (max_x - min_x).max(1e-9);
    let span_y = (max_y - min_y).max(1e-9);
    let inner = VIEW - 2.0 * MARGIN;
    let to_px = |x: f64, y: f64| {
        let px = MARGIN + (x - min_x) / span_x * inner;
        let py = VIEW - MARGIN - (y - min_y) / span_y * inner;
        (px, py)
    };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{VIEW}\" height=\"{VIEW}\" viewBox=\"0 0 {VIEW} {VIEW}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\" stroke-width=\"1\"/>\n",
        m = MARGIN,
        b = VIEW - MARGIN,
        r = VIEW - MARGIN
    ));
    svg.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\" stroke-width=\"1\"/>\n",
        m = MARGIN,
        b = VIEW - MARGIN
    ));
    svg.push_str(&format!(
        "<text x=\"{x}\" y=\"{y}\" font-size=\"14\" text-anchor=\"middle\">{label}</text>\n",
        x = VIEW / 2.0,
        y = VIEW - 12.0,
        label = xml_escape(&projection.x_label)
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{y}\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 16 {y})\">{label}</text>\n",
        y = VIEW / 2.0,
        label = xml_escape(&projection.y_label)
    ));
    svg.push_str(&format!(
        "<text x=\"{x}\" y=\"24\" font-size=\"14\" text-anchor=\"middle\">{t}</text>\n",
        x = VIEW / 2.0,
        t = xml_escape(title)
    ));
    svg.push_str(&format!(
        "<circle cx=\"{x}\" cy=\"40\" r=\"4\" fill=\"#d62728\"/><text x=\"{tx}\" y=\"44\" font-size=\"12\">teacher</text>\n",
        x = MARGIN + 10.0,
        tx = MARGIN + 20.0
    ));
    svg.push_str(&format!(
        "<circle cx=\"{x}\" cy=\"40\" r=\"4\" fill=\"#1f77b4\"/><text x=\"{tx}\" y=\"44\" font-size=\"12\">student</text>\n",
        x = MARGIN + 110.0,
        tx = MARGIN + 120.0
    ));
    for (cloud, color) in [(&projection.teacher, "#d62728"), (&projection.student, "#1f77b4")] {
        for row in cloud.rows() {
            let (px, py) = to_px(row[0], row[1]);
            svg.push_str(&format!(
                "<circle cx=\"{px:.3}\" cy=\"{py:.3}\" r=\"3\" fill=\"{color}\" fill-opacity=\"0.6\"/>\n"
            ));
        }
    }
    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn save_svg(path: &std::path::Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|e| Error::io(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, d), |_| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn two_dimensional_clouds_pass_through_raw() {
        let t = cloud(10, 2, 1);
        let s = cloud(10, 2, 2);
        let p = project_clouds(&t, &s).unwrap();
        assert_eq!(p.teacher, t);
        assert_eq!(p.student, s);
        assert_eq!(p.x_label, "z0");
    }

    #[test]
    fn identical_clouds_render_identical_pixels() {
        let t = cloud(20, 5, 3);
        let p = project_clouds(&t, &t).unwrap();
        assert_eq!(p.teacher, p.student);
        let svg = render_scatter_svg(&p, "identical");
        // every red circle has a blue twin at the same coordinates
        let reds: Vec<&str> = svg.lines().filter(|l| l.contains("#d62728") && l.contains("r=\"3\"")).collect();
        let blues: Vec<&str> = svg.lines().filter(|l| l.contains("#1f77b4") && l.contains("r=\"3\"")).collect();
        assert_eq!(reds.len(), blues.len());
        for (r, b) in reds.iter().zip(&blues) {
            let coord = |l: &str| {
                let cx = l.split("cx=\"").nth(1).unwrap().split('"').next().unwrap().to_string();
                let cy = l.split("cy=\"").nth(1).unwrap().split('"').next().unwrap().to_string();
                (cx, cy)
            };
            assert_eq!(coord(r), coord(b));
        }
    }

    #[test]
    fn pca_labels_carry_explained_variance() {
        let t = cloud(40, 6, 4);
        let s = cloud(40, 6, 5);
        let p = project_clouds(&t, &s).unwrap();
        assert!(p.x_label.starts_with("PC1 ("));
        assert!(p.x_label.ends_with("% var)"));
    }

    #[test]
    fn pca_projection_is_shared() {
        // shifting the student cloud must not change the teacher projection
        // direction: both use union statistics, so recompute and compare
        let t = cloud(30, 4, 6);
        let s = cloud(30, 4, 7);
        let p1 = project_clouds(&t, &s).unwrap();
        let p2 = project_clouds(&t, &s).unwrap();
        assert_eq!(p1.teacher, p2.teacher);
        assert_eq!(p1.student, p2.student);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let t = cloud(5, 3, 8);
        let s = cloud(5, 4, 9);
        assert!(project_clouds(&t, &s).is_err());
    }
}
