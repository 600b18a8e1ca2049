//! Subcommand implementations. Each returns a JSON summary for stdout.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use cellpeel_core::masking::AnnotationSet;
use cellpeel_core::peel::{load_furrow, load_peel, rectify, save_peel, PeelImage, PeelLayout};
use cellpeel_core::phantom::{
    cylinder_annotations, cylinder_labels, cylinder_mask, digital_sphere, membrane_stack, CylinderSpec, Groove,
    TranslatedCells,
};
use cellpeel_core::quantify::{features_2d, quantify_3d, Feature, QuantifyParams};
use cellpeel_core::segment2d::{load_label_image, save_label_image, SegParams, SeedSet};
use cellpeel_core::shells::ShellParams;
use cellpeel_core::tracking::{boundary_labels, filter_complete_tracks, track_2d, track_3d_overlap, TrackParams, TrackTable};
use cellpeel_core::volume_io::{load_labels, load_mask, save_labels, save_mask, save_stack};
use cellpeel_core::{LabelVolume, FRAME_INTERVAL_S};
use serde_json::{json, Value};

use crate::cli::*;
use crate::config::{expand_pattern, resolve_inputs, PipelineConfig};
use crate::error::{CliError, OrCli};
use crate::ops::{build_mask, build_peel, load_2d_input, load_raw, peel_domain, read_json, segment, write_json};

/// Global settings after merging the config file and global flags.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    pub cfg: PipelineConfig,
    pub spacing: Option<[f64; 3]>,
}

impl Settings {
    pub fn from_cli(cli: &Cli) -> Result<Self, CliError> {
        let cfg = match &cli.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        let spacing = match &cli.spacing {
            Some(v) => {
                let s: [f64; 3] =
                    v.as_slice().try_into().map_err(|_| CliError::usage(format!("--spacing needs 3 values, got {}", v.len())))?;
                if s.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
                    return Err(CliError::usage(format!("--spacing must be positive, got {v:?}")));
                }
                Some(s)
            }
            None => cfg.spacing,
        };
        Ok(Self { cfg, spacing })
    }

    pub fn shell_params(&self, t: Option<f64>, tol: Option<f64>) -> Result<ShellParams, CliError> {
        let d = ShellParams::default();
        ShellParams::new(t.or(self.cfg.shell.t).unwrap_or(d.t), tol.or(self.cfg.shell.tol).unwrap_or(d.tol)).cli()
    }

    pub fn seg_params(&self, h: Option<f64>, connectivity: Option<u8>, invert: bool) -> Result<SegParams, CliError> {
        let d = SegParams::default();
        let p = SegParams {
            h: h.or(self.cfg.seg.h).unwrap_or(d.h),
            connectivity: connectivity.or(self.cfg.seg.connectivity).unwrap_or(d.connectivity),
            invert,
        };
        p.validate().cli()?;
        Ok(p)
    }

    fn frame_interval(&self, flag: Option<f64>) -> f64 {
        flag.or(self.cfg.frame_interval).unwrap_or(FRAME_INTERVAL_S)
    }

    /// Raw stack paths from the config, if it names them.
    pub fn config_inputs(&self) -> Result<Option<Vec<PathBuf>>, CliError> {
        match &self.cfg.input {
            Some(i) => Ok(Some(expand_pattern(i, self.cfg.frames.unwrap_or(1))?)),
            None => Ok(None),
        }
    }
}

pub fn run(cli: Cli) -> Result<Value, CliError> {
    let s = Settings::from_cli(&cli)?;
    match cli.command {
        Command::Mask(a) => mask(&s, a),
        Command::Peel(a) => peel(&s, a),
        Command::Rectify(a) => rectify_cmd(a),
        Command::Segment2d(a) => segment2d(&s, a),
        Command::Track2d(a) => track2d(&s, a),
        Command::Track3d(a) => track3d(&s, a),
        Command::Quantify(a) => quantify(&s, a),
        Command::Phantom(p) => phantom(p),
        Command::Serve(a) => crate::server::serve_blocking(&s, a).map(|_| json!({"served": true})),
    }
}

fn mask(s: &Settings, a: MaskArgs) -> Result<Value, CliError> {
    let input = match a.input {
        Some(p) => p,
        None => s
            .config_inputs()?
            .and_then(|v| v.into_iter().next())
            .ok_or_else(|| CliError::usage("mask needs --input or a config input"))?,
    };
    let raw = load_raw(&input, s.spacing)?;
    let anns: AnnotationSet = read_json(&a.annotations)?;
    let (mask, masked) = build_mask(&raw, &anns)?;
    save_mask(&mask, &a.out).cli()?;
    if let Some(p) = &a.masked_raw {
        save_stack(&masked, p).cli()?;
    }
    let fg = mask.data.iter().filter(|&&b| b).count();
    log::info!("mask: {fg} foreground voxels");
    Ok(json!({"mask": a.out, "masked_raw": a.masked_raw, "dims": mask.meta.dims, "foreground": fg}))
}

fn peel(s: &Settings, a: PeelArgs) -> Result<Value, CliError> {
    let mask = load_mask(&a.mask).cli()?;
    let raw = load_raw(&a.raw, s.spacing)?;
    let params = s.shell_params(a.t, a.tol)?;
    let (peel, report) = build_peel(&mask, &raw, a.surface, &params, !a.no_fill)?;
    let layout = if a.separate { PeelLayout::Separate } else { PeelLayout::Combined };
    save_peel(&peel, &a.out, layout).cli()?;
    if let Some(p) = &a.diagnostics {
        write_json(p, &report)?;
    }
    let thinned: usize = report.peel.thinned.iter().sum();
    if thinned > 0 {
        log::warn!("peel: {thinned} shell pixels dropped to make rings traceable");
    }
    Ok(json!({"peel": a.out, "width": peel.width, "height": peel.height, "thinned": thinned}))
}

fn rectify_cmd(a: RectifyArgs) -> Result<Value, CliError> {
    let peel = load_peel(&a.peel).cli()?;
    let furrow = load_furrow(&a.furrow).cli()?;
    let out = rectify(&peel, &furrow).cli()?;
    let layout = if a.separate { PeelLayout::Separate } else { PeelLayout::Combined };
    save_peel(&out, &a.out, layout).cli()?;
    Ok(json!({"rectified": a.out, "width": out.width, "height": out.height}))
}

fn segment2d(s: &Settings, a: Segment2dArgs) -> Result<Value, CliError> {
    let p = s.seg_params(a.h, a.connectivity, a.invert)?;
    let (img, peel) = load_2d_input(&a.image)?;
    let domain = peel.as_ref().map(peel_domain);
    let given: Option<SeedSet> = a.seeds.as_deref().map(read_json).transpose()?;
    let (seeds, labels) = segment(&img, domain.as_ref(), given, &p)?;
    save_label_image(&labels, &a.out).cli()?;
    if let Some(sp) = &a.seeds_out {
        write_json(sp, &seeds)?;
    }
    let count = labels.data.iter().copied().filter(|&l| l != 0).collect::<BTreeSet<_>>().len();
    Ok(json!({"labels": a.out, "label_count": count, "seeds": seeds.len(), "h": p.h}))
}

fn load_label_volumes(paths: &[PathBuf], spacing: Option<[f64; 3]>) -> Result<Vec<LabelVolume>, CliError> {
    paths
        .iter()
        .map(|p| {
            let mut v = load_labels(p).cli()?;
            if let Some(sp) = spacing {
                v.meta.spacing = sp;
            }
            Ok(v)
        })
        .collect()
}

fn load_peels(paths: &[PathBuf]) -> Result<Vec<PeelImage>, CliError> {
    paths.iter().map(|p| load_peel(p).cli()).collect()
}

fn track2d(s: &Settings, a: Track2dArgs) -> Result<Value, CliError> {
    let paths = resolve_inputs(&a.labels, a.frames)?;
    let frames = paths.iter().map(|p| load_label_image(p).cli()).collect::<Result<Vec<_>, _>>()?;
    let pixel_size = if !a.peels.is_empty() {
        let peels = load_peels(&resolve_inputs(&a.peels, a.frames)?)?;
        peels[0].pixel_size
    } else if let Some(v) = &a.pixel_size {
        let ps: [f64; 2] =
            v.as_slice().try_into().map_err(|_| CliError::usage(format!("--pixel-size needs 2 values, got {}", v.len())))?;
        if ps.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(CliError::usage(format!("--pixel-size must be positive, got {v:?}")));
        }
        ps
    } else if let Some(sp) = s.spacing {
        [sp[0], sp[1]]
    } else {
        return Err(CliError::usage("track2d needs --peels, --pixel-size or a spacing"));
    };
    let p = TrackParams {
        max_dist: a.max_dist.or(s.cfg.track.max_dist).unwrap_or(TrackParams::default().max_dist),
        frame_interval: s.frame_interval(None),
    };
    let table = track_2d(&frames, pixel_size, &p).cli()?;
    table.save(&a.out).cli()?;
    Ok(json!({"tracks": a.out, "track_count": table.tracks().len(), "rows": table.rows.len()}))
}

fn track3d(s: &Settings, a: Track3dArgs) -> Result<Value, CliError> {
    let paths = resolve_inputs(&a.labels, a.frames)?;
    let frames = load_label_volumes(&paths, s.spacing)?;
    let table = track_3d_overlap(&frames).cli()?;
    let table = if a.keep_all {
        table
    } else {
        let boundary: Vec<_> = frames.iter().map(boundary_labels).collect();
        filter_complete_tracks(&table, frames.len(), &boundary)
    };
    table.save(&a.out).cli()?;
    Ok(json!({
        "tracks": a.out,
        "track_count": table.tracks().len(),
        "kept": table.kept_ids().len(),
        "conflicted": table.conflicted.len(),
    }))
}

fn quantify(s: &Settings, a: QuantifyArgs) -> Result<Value, CliError> {
    let feats = a.features.iter().map(|f| Feature::parse(f.trim()).cli()).collect::<Result<Vec<_>, _>>()?;
    let is2d = |f: &Feature| Feature::ALL_2D.contains(f);
    let n2d = feats.iter().filter(|f| is2d(f)).count();
    if n2d != 0 && n2d != feats.len() {
        return Err(CliError::usage("cannot mix 2D and 3D features in one run"));
    }
    let paths = resolve_inputs(&a.labels, a.frames)?;
    let tracks = TrackTable::load(&a.tracks).cli()?;
    let table = if n2d > 0 {
        if a.peels.is_empty() {
            return Err(CliError::usage("2D features need --peels"));
        }
        let peels = load_peels(&resolve_inputs(&a.peels, a.frames)?)?;
        let frames = paths.iter().map(|p| load_label_image(p).cli()).collect::<Result<Vec<_>, _>>()?;
        let mut t = features_2d(&frames, &peels, &tracks, s.frame_interval(a.frame_interval)).cli()?;
        t.rows.retain(|r| feats.iter().any(|f| f.name() == r.feature));
        t
    } else {
        let frames = load_label_volumes(&paths, s.spacing)?;
        let d = QuantifyParams::default();
        let p = QuantifyParams {
            shell_radius: a.shell_radius.or(s.cfg.quantify.shell_radius).unwrap_or(d.shell_radius),
            plane_cell: a.plane_cell.or(s.cfg.quantify.plane_cell),
        };
        quantify_3d(&frames, &tracks, &p, &feats).cli()?
    };
    table.save(&a.out).cli()?;
    Ok(json!({"features": a.out, "rows": table.rows.len()}))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn phantom(cmd: PhantomCommand) -> Result<Value, CliError> {
    match cmd {
        PhantomCommand::Cylinder(a) => {
            if !(a.r_out > a.r_in) || !(a.r_in > 0.0) || a.height == 0 || a.frames == 0 {
                return Err(CliError::usage("need r_out > r_in > 0, height >= 1 and frames >= 1"));
            }
            ensure_dir(&a.out_dir)?;
            let mut spec = CylinderSpec::new(a.r_out, a.r_in, a.height);
            spec.margin = a.margin;
            spec.sectors = a.sectors.max(1);
            spec.cell_length = a.cell_length.max(1);
            spec.groove = a.groove_depth.map(|depth| Groove { half_width: a.groove_half_width, depth });
            for f in 0..a.frames {
                let mut labels = cylinder_labels(&spec, f, a.shift);
                labels.meta = labels.meta.clone().with_frame_interval(FRAME_INTERVAL_S);
                let stack = membrane_stack(&labels);
                save_stack(&stack, &a.out_dir.join(format!("stack_{f:03}.tif"))).cli()?;
                save_labels(&labels, &a.out_dir.join(format!("labels_{f:03}.tif"))).cli()?;
            }
            save_mask(&cylinder_mask(&spec), &a.out_dir.join("mask.tif")).cli()?;
            write_json(&a.out_dir.join("annotations.json"), &cylinder_annotations(&spec, a.annotated))?;
            let truth = json!({
                "kind": "cylinder",
                "dims": spec.dims(),
                "centre": spec.centre(),
                "r_out": spec.r_out,
                "r_in": spec.r_in,
                "height": spec.height,
                "frames": a.frames,
                "shift": a.shift,
                "sectors": spec.sectors,
                "cell_length": spec.cell_length,
                "groove": a.groove_depth.map(|d| json!({"depth": d, "half_width": a.groove_half_width})),
            });
            write_json(&a.out_dir.join("truth.json"), &truth)?;
            Ok(truth)
        }
        PhantomCommand::Sphere(a) => {
            if !(a.r > 0.0) {
                return Err(CliError::usage("sphere radius must be > 0"));
            }
            ensure_dir(&a.out_dir)?;
            let m = digital_sphere(a.r, a.margin);
            let labels = m.map(|&b| b as u32);
            save_labels(&labels, &a.out_dir.join("labels.tif")).cli()?;
            let voxels = m.data.iter().filter(|&&b| b).count();
            let truth = json!({
                "kind": "sphere",
                "r": a.r,
                "dims": m.meta.dims,
                "voxels": voxels,
                "analytic_volume": 4.0 / 3.0 * std::f64::consts::PI * a.r.powi(3),
            });
            write_json(&a.out_dir.join("truth.json"), &truth)?;
            Ok(truth)
        }
        PhantomCommand::Cells(a) => {
            let dims: [usize; 3] = a
                .dims
                .as_slice()
                .try_into()
                .map_err(|_| CliError::usage(format!("--dims needs 3 values, got {}", a.dims.len())))?;
            if dims.contains(&0) || a.size == 0 || a.pitch <= a.size || a.frames == 0 {
                return Err(CliError::usage("need positive dims, pitch > size > 0 and frames >= 1"));
            }
            ensure_dir(&a.out_dir)?;
            let cells = TranslatedCells { dims, size: a.size, pitch: a.pitch, shift: a.shift, frames: a.frames };
            for t in 0..a.frames {
                save_labels(&cells.frame(t), &a.out_dir.join(format!("labels_{t:03}.tif"))).cli()?;
            }
            let truth = json!({
                "kind": "cells",
                "dims": dims,
                "frames": a.frames,
                "shift": a.shift,
                "cells": cells.origins().len(),
                "interior_labels": cells.interior_labels(),
            });
            write_json(&a.out_dir.join("truth.json"), &truth)?;
            Ok(truth)
        }
    }
}
