use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use latent_edit::io::{read_image, read_latent, write_featset, write_image, write_label, write_latent};
use latent_edit::toy::{BlobGenerator, ToyConditionalGenerator};
use latent_edit::{ConditionalGenerator, FeatureSet, Generator, ImageBuffer, LabelVector, LatentCode};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_latent-edit"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn z8() -> LatentCode<f64> {
    LatentCode::from_vec(vec![0.2, -0.1, 0.3, 0.0, -0.2, 0.1, 0.4, -0.3]).unwrap()
}

#[test]
fn help_and_usage_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    for cmd in [
        "sample-dataset",
        "train-hyperplane",
        "recover",
        "edit",
        "beautify-conditional",
        "fid",
        "brisque",
        "identity-distance",
    ] {
        assert_eq!(code(&run(d, &[cmd, "--help"])), 0, "{cmd}");
    }
    assert_eq!(code(&run(d, &["edit", "--bogus"])), 2);
    assert_eq!(code(&run(d, &["nope"])), 2);
    let missing_out = run(
        d,
        &[
            "sample-dataset",
            "--generator",
            "blob",
            "--scorer",
            "brightness",
            "-n",
            "3",
        ],
    );
    assert_eq!(code(&missing_out), 2);
    let bad_spec = run(
        d,
        &[
            "sample-dataset",
            "--generator",
            "gan:seed=1",
            "--scorer",
            "brightness",
            "-n",
            "3",
            "--out",
            "x",
        ],
    );
    assert_eq!(code(&bad_spec), 2);
    assert!(stderr(&bad_spec).contains("gan"));
}

#[test]
fn dataset_and_hyperplane() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let start = Instant::now();
    let args = [
        "sample-dataset",
        "--generator",
        "blob:seed=3,size=32",
        "--scorer",
        "latentlinear:seed=4",
        "-n",
        "100",
        "--seed",
        "5",
        "--out",
    ];
    assert_eq!(code(&run(d, &[&args[..], &["small"]].concat())), 0);
    assert!(start.elapsed().as_secs() < 10);
    assert!(d.join("small/images/000099.pgm").exists());

    let big = [
        "sample-dataset",
        "--generator",
        "blob:seed=3,size=16",
        "--scorer",
        "latentlinear:seed=4",
        "-n",
        "4000",
        "--seed",
        "5",
        "--no-images",
        "--out",
        "big",
    ];
    assert_eq!(code(&run(d, &big)), 0);
    assert!(!d.join("big/images").exists());
    let o = run(
        d,
        &[
            "train-hyperplane",
            "--dataset",
            "big",
            "--pos",
            "600",
            "--neg",
            "600",
            "--val",
            "400",
            "--seed",
            "1",
            "--out",
            "h.json",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let val: f64 = stdout(&o)
        .lines()
        .find_map(|l| l.strip_prefix("val_accuracy "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(val >= 0.94, "{val}");
    let h = fs::read_to_string(d.join("h.json")).unwrap();
    assert!(h.contains("val_accuracy") && h.contains("rem_accuracy"));

    let too_many = run(d, &["train-hyperplane", "--dataset", "small", "--out", "h2.json"]);
    assert_eq!(code(&too_many), 2);
    let no_dataset = run(d, &["train-hyperplane", "--dataset", "absent", "--out", "h3.json"]);
    assert_eq!(code(&no_dataset), 2);
}

#[test]
fn recover_cases() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let gen = BlobGenerator::new(8, 32, 1, 7).unwrap();
    write_image(d.join("t.pgm"), &Generator::<f64>::synthesize(&gen, &z8()).unwrap()).unwrap();
    let init = LatentCode::from_vec(vec![0.1; 8]).unwrap();
    fs::write(
        d.join("cfg.json"),
        format!(r#"{{"init": "EXPLICIT", "init_latent": {}, "weights": {{"lambda1": 1.0, "lambda2": 0.0, "lambda3": 0.0, "lambda4": 0.0, "lambda5": 0.0}}}}"#,
            latent_edit::io::latent_to_json(&init)),
    )
    .unwrap();
    let frozen = run(
        d,
        &[
            "recover",
            "--image",
            "t.pgm",
            "--generator",
            "blob:seed=7,size=32",
            "--config",
            "cfg.json",
            "--eta",
            "0",
            "--max-steps",
            "1",
            "--out",
            "z.json",
        ],
    );
    assert_eq!(code(&frozen), 0, "{}", stderr(&frozen));
    assert_eq!(read_latent::<f64>(d.join("z.json")).unwrap().values(), init.values());

    let traced = run(
        d,
        &[
            "recover",
            "--image",
            "t.pgm",
            "--generator",
            "blob:seed=7,size=32",
            "--max-steps",
            "30",
            "--trace",
            "trace.jsonl",
            "--out",
            "z2.json",
        ],
    );
    assert_eq!(code(&traced), 0, "{}", stderr(&traced));
    let lines: Vec<serde_json::Value> = fs::read_to_string(d.join("trace.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 30);
    assert!(lines[0]["terms"]["pixel"].is_number());

    assert_eq!(
        code(&run(
            d,
            &[
                "recover",
                "--image",
                "missing.pgm",
                "--generator",
                "blob:seed=7,size=32",
                "--out",
                "z3.json"
            ]
        )),
        2
    );
    assert_eq!(
        code(&run(
            d,
            &["recover", "--image", "t.pgm", "--generator", "blob:seed=7,size=32"]
        )),
        2
    );
    let wrong_size = run(
        d,
        &[
            "recover",
            "--image",
            "t.pgm",
            "--generator",
            "blob:seed=7,size=16",
            "--out",
            "z4.json",
        ],
    );
    assert_eq!(code(&wrong_size), 2);
}

#[test]
fn edit_sweeps() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write_latent(d.join("z.json"), &z8()).unwrap();
    fs::write(
        d.join("h.json"),
        r#"{"dim": 8, "normal": [1, 0, 0, 0, 0, 0, 0, 0], "bias": 0.0, "attribute": "beauty"}"#,
    )
    .unwrap();
    let base = [
        "edit",
        "--latent",
        "z.json",
        "--hyperplane",
        "h.json",
        "--generator",
        "blob:seed=7,size=32",
    ];
    let o = run(d, &[&base[..], &["--out", "f"]].concat());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("warning"));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("f/manifest.json")).unwrap()).unwrap();
    let frames = manifest["frames"].as_array().unwrap();
    assert_eq!(frames.len(), 11);
    assert_eq!(frames[10]["file"], "frame_010_alpha_3.000.pgm");
    let gen = BlobGenerator::new(8, 32, 1, 7).unwrap();
    let recon: ImageBuffer<f64> = Generator::<f64>::synthesize(&gen, &z8()).unwrap();
    let first: ImageBuffer<f64> = read_image(d.join("f/frame_000_alpha_0.000.pgm")).unwrap();
    let expect: ImageBuffer<f64> = latent_edit::io::decode_pnm(&latent_edit::io::encode_pnm(&recon)).unwrap();
    assert_eq!(first, expect);

    let one = run(
        d,
        &[&base[..], &["--start", "0.5", "--end", "0.5", "--out", "g"]].concat(),
    );
    assert_eq!(code(&one), 0);
    assert!(!stderr(&one).contains("warning"));
    assert_eq!(fs::read_dir(d.join("g")).unwrap().count(), 2);
    assert_eq!(code(&run(d, &[&base[..], &["--step", "0", "--out", "h"]].concat())), 2);
    assert_eq!(
        code(&run(d, &[&base[..], &["--step", "-0.3", "--out", "h"]].concat())),
        2
    );
}

#[test]
fn beautify_frames() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write_latent(d.join("z.json"), &z8()).unwrap();
    let label = LabelVector::normalized(0.3, vec![0.5, 0.1, -0.2, 0.3, 0.0, 0.4, -0.1, 0.2]).unwrap();
    write_label(d.join("l.json"), &label).unwrap();
    let base = [
        "beautify-conditional",
        "--latent",
        "z.json",
        "--label",
        "l.json",
        "--generator",
        "condblob:seed=2,size=32",
    ];
    assert_eq!(
        code(&run(d, &[&base[..], &["--frames", "1", "--out", "one"]].concat())),
        0
    );
    let cgen = ToyConditionalGenerator::new(8, 32, 1, 8, 2).unwrap();
    let recon = cgen.synthesize(&z8(), &label).unwrap();
    let got: ImageBuffer<f64> = read_image(d.join("one/frame_000_alpha_0.300.pgm")).unwrap();
    assert_eq!(
        got,
        latent_edit::io::decode_pnm(&latent_edit::io::encode_pnm(&recon)).unwrap()
    );

    let o = run(d, &[&base[..], &["--frames", "20", "--out", "many"]].concat());
    assert_eq!(code(&o), 0);
    assert!(stderr(&o).contains("truncated"));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("many/manifest.json")).unwrap()).unwrap();
    let frames = manifest["frames"].as_array().unwrap();
    assert_eq!(frames.len(), 20);
    assert_eq!(frames[19]["alpha"], 1.0);
    let lum: Vec<f64> = frames
        .iter()
        .map(|f| {
            read_image::<f64>(d.join("many").join(f["file"].as_str().unwrap()))
                .unwrap()
                .mean()
        })
        .collect();
    assert!(lum.windows(2).all(|w| w[1] >= w[0]), "{lum:?}");
}

#[test]
fn metric_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let a = FeatureSet::new(2, 3, vec![0.0, 0.0, 0.0, 2.0, 0.0, 0.0]).unwrap();
    let b = FeatureSet::new(2, 3, vec![1.0, 0.0, 0.0, 3.0, 0.0, 0.0]).unwrap();
    write_featset(d.join("a.featset"), &a).unwrap();
    write_featset(d.join("b.jsonl"), &b).unwrap();
    let same = run(d, &["fid", "a.featset", "a.featset"]);
    assert_eq!(code(&same), 0);
    assert_eq!(stdout(&same).trim().parse::<f64>().unwrap(), 0.0);
    let shifted = run(d, &["fid", "a.featset", "b.jsonl", "--report", "r.json"]);
    assert!((stdout(&shifted).trim().parse::<f64>().unwrap() - 1.0).abs() < 1e-6);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    assert_eq!(report["metric"], "fid");

    let ident = run(d, &["identity-distance", "a.featset", "a.featset"]);
    assert_eq!(stdout(&ident).trim().parse::<f64>().unwrap(), 0.0);
    let gen = BlobGenerator::new(8, 32, 1, 7).unwrap();
    write_image(d.join("x.pgm"), &Generator::<f64>::synthesize(&gen, &z8()).unwrap()).unwrap();
    let img = run(d, &["identity-distance", "x.pgm", "x.pgm"]);
    assert_eq!(stdout(&img).trim().parse::<f64>().unwrap(), 0.0);

    fs::write(
        d.join("model.json"),
        serde_json::json!({ "weights": vec![1.0; 36], "bias": 0.5, "feature_min": vec![0.0; 36], "feature_max": vec![1.0; 36] }).to_string(),
    )
    .unwrap();
    let q = run(d, &["brisque", "x.pgm", "--model", "model.json", "--report", "q.json"]);
    assert_eq!(code(&q), 0, "{}", stderr(&q));
    assert!(stdout(&q).trim().parse::<f64>().unwrap().is_finite());
    assert_eq!(code(&run(d, &["brisque", "x.pgm", "--model", "absent.json"])), 2);
    assert_eq!(code(&run(d, &["fid", "a.featset", "missing.featset"])), 2);
}
