//! Boundary table for every category rule: each threshold is probed just
//! below, at and just above its value, with the expected condition written
//! out by hand from the published rules.

use domainscope_core::appearance::{
    classify_color, classify_illumination, classify_visibility, ColorMetrics, IlluminationMetrics,
};
use domainscope_core::geometry::{classify_orientation, classify_perspective, GeometryMetrics};
use domainscope_core::scene::{classify_background, classify_layout, classify_scale, LayoutMetrics, ScaleMetrics};
use domainscope_core::CalibrationProfile;

pub const EPS: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct Case {
    pub rule: String,
    pub got: String,
    pub want: &'static str,
}

fn below(v: f64) -> f64 {
    v - EPS
}

fn above(v: f64) -> f64 {
    v + EPS
}

fn illum(median: f64, under: f64, over: f64) -> IlluminationMetrics {
    IlluminationMetrics {
        median_luminance: median,
        overexposed_ratio: over,
        underexposed_ratio: under,
    }
}

fn color(distortion: f64, bgr: f64) -> ColorMetrics {
    ColorMetrics {
        mean_r: 0.0,
        mean_g: 0.0,
        mean_b: 0.0,
        distortion,
        blue_green_ratio: bgr,
    }
}

fn layout(n: usize, coverage: f64, overlap: f64) -> LayoutMetrics {
    LayoutMetrics {
        object_count: n,
        coverage,
        overlap,
    }
}

fn scale(mean: f64, small: f64, large: f64) -> ScaleMetrics {
    ScaleMetrics {
        mean_norm_area: mean,
        small_ratio: small,
        large_ratio: large,
    }
}

fn geo(lr: f64, tb: f64, range: f64, gradient: f64) -> GeometryMetrics {
    GeometryMetrics {
        delta_lr: lr,
        delta_tb: tb,
        depth_range: range,
        brightness_gradient: gradient,
    }
}

/// Every case under the default thresholds.
pub fn cases() -> Vec<Case> {
    let p = CalibrationProfile::identity();
    let mut out = Vec::new();
    let mut push = |rule: String, got: String, want: &'static str| out.push(Case { rule, got, want });

    for (v, want) in [
        (below(0.35), "low"),
        (0.35, "moderate"),
        (above(0.35), "moderate"),
        (below(0.65), "moderate"),
        (0.65, "moderate"),
        (above(0.65), "high"),
        (0.0, "low"),
        (1.0, "high"),
    ] {
        push(format!("visibility score {v}"), classify_visibility(v, &p.visibility).to_string(), want);
    }

    for (m, want) in [
        (below(100.0), "dark"),
        (100.0, "medium"),
        (above(100.0), "medium"),
        (below(130.0), "medium"),
        (130.0, "medium"),
        (above(130.0), "bright"),
    ] {
        let got = classify_illumination(&illum(m, 0.0, 0.0), &p.illumination);
        push(format!("median luminance {m}"), got.to_string(), want);
    }
    // Exposure ratios decide only inside the medium band.
    for (under, over, want) in [
        (above(0.5), 0.0, "dark"),
        (0.5, 0.0, "medium"),
        (0.0, above(0.5), "bright"),
        (0.0, 0.5, "medium"),
    ] {
        let got = classify_illumination(&illum(115.0, under, over), &p.illumination);
        push(format!("median 115, under {under}, over {over}"), got.to_string(), want);
    }
    for (m, under, over, want) in [(50.0, 0.0, 0.9, "dark"), (200.0, 0.9, 0.0, "bright")] {
        let got = classify_illumination(&illum(m, under, over), &p.illumination);
        push(format!("median {m}, under {under}, over {over}"), got.to_string(), want);
    }

    for (d, bgr, want) in [
        (0.6, 2.0, "natural"),
        (above(0.6), 2.0, "blue"),
        (0.6, 0.1, "natural"),
        (above(0.6), 0.1, "green"),
        (1.0, 0.8, "natural"),
        (1.0, above(0.8), "blue"),
        (1.0, 0.7, "natural"),
        (1.0, below(0.7), "green"),
        (1.0, 0.75, "natural"),
    ] {
        push(format!("distortion {d}, blue/green {bgr}"), classify_color(&color(d, bgr), &p.color).to_string(), want);
    }

    let lt = &p.layout;
    for (n, c, o, want) in [
        (4, 0.0, 0.0, "sparse"),
        (5, 0.0, 0.0, "moderate"),
        (0, 0.0, 0.0, "sparse"),
        (11, 0.1, 0.1, "moderate"),
        (12, 0.1, 0.1, "crowded"),
        (4, below(0.05), 0.0, "sparse"),
        (4, 0.05, 0.0, "moderate"),
        (4, 0.0, below(0.05), "sparse"),
        (4, 0.0, 0.05, "moderate"),
        (5, 0.4, 0.1, "moderate"),
        (5, above(0.4), 0.1, "crowded"),
        (5, 0.1, 0.15, "moderate"),
        (5, 0.1, above(0.15), "crowded"),
        // Crowded wins over a sparse count.
        (1, above(0.4), 0.0, "crowded"),
        (1, 0.0, above(0.15), "crowded"),
    ] {
        push(format!("layout n={n} coverage={c} overlap={o}"), classify_layout(&layout(n, c, o), lt).to_string(), want);
    }

    let st = &p.scale;
    for (a, rs, rl, want) in [
        (below(0.005), 0.0, 0.0, "small"),
        (0.005, 0.0, 0.0, "medium"),
        (0.01, 0.5, 0.0, "small"),
        (0.01, below(0.5), 0.0, "medium"),
        (0.025, 0.0, 0.0, "medium"),
        (above(0.025), 0.0, 0.0, "large"),
        (0.01, 0.0, 0.5, "large"),
        (0.01, 0.0, below(0.5), "medium"),
        // Both rules fire: the larger share wins, a tie is medium.
        (0.03, 0.6, 0.4, "small"),
        (0.001, 0.4, 0.6, "large"),
        (0.01, 0.5, 0.5, "medium"),
    ] {
        push(format!("scale mean={a} small={rs} large={rl}"), classify_scale(&scale(a, rs, rl), st).to_string(), want);
    }

    for (b, want) in [
        (below(0.15), "simple"),
        (0.15, "textured"),
        (above(0.15), "textured"),
        (below(0.4), "textured"),
        (0.4, "textured"),
        (above(0.4), "complex"),
    ] {
        push(format!("background score {b}"), classify_background(b, &p.background).to_string(), want);
    }

    for (lr, want) in [
        (below(1.0), "upright"),
        (1.0, "slightly_tilted"),
        (2.5, "slightly_tilted"),
        (above(2.5), "rotated"),
    ] {
        let got = classify_orientation(&geo(lr, 0.0, 0.0, 0.0), &p.orientation);
        push(format!("delta_lr {lr}"), got.to_string(), want);
    }

    let pt = &p.perspective;
    for (tb, rd, gb, want) in [
        (below(2.0), below(3.0), 0.0, "nadir"),
        (2.0, 0.0, 0.0, "oblique"),
        (0.0, 3.0, 0.0, "oblique"),
        (4.0, 0.0, 0.0, "oblique"),
        (above(4.0), 0.0, 0.0, "front"),
        (0.0, 5.0, 0.0, "oblique"),
        (0.0, above(5.0), 0.0, "front"),
        (0.0, 0.0, 50.0, "nadir"),
        (0.0, 0.0, above(50.0), "front"),
        (3.0, 4.0, 50.0, "oblique"),
        (3.0, 4.0, above(50.0), "front"),
        // Only a positive (brighter top) gradient counts.
        (0.0, 0.0, -80.0, "nadir"),
    ] {
        let got = classify_perspective(&geo(0.0, tb, rd, gb), pt);
        push(format!("delta_tb={tb} range={rd} gradient={gb}"), got.to_string(), want);
    }
    out
}
