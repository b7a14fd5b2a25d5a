#![allow(dead_code)]

use std::io::{Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::time::Duration;

use pathfinder::depth_io::encode_png;
use pathfinder_core::DepthImage;

pub const SIDE: usize = 480;

pub fn scene(w: usize, h: usize, f: impl Fn(usize, usize) -> f64) -> DepthImage {
    let v = (0..w * h).map(|i| f(i / w, i % w)).collect();
    DepthImage::new(w, h, v, "synthetic").unwrap()
}

pub fn uniform(w: usize, h: usize) -> DepthImage {
    scene(w, h, |_, _| 0.5)
}

/// Everything above the bottom patch row is nearer than the floor under the user.
pub fn blocked() -> DepthImage {
    scene(SIDE, SIDE, |r, _| if r >= 465 { 0.3 } else { 0.6 })
}

/// A receding floor with a near block filling the upper-left of the frame.
pub fn obstacle_left() -> DepthImage {
    scene(SIDE, SIDE, |r, c| {
        if c < 360 && r < 300 {
            0.95
        } else {
            0.2 + 0.6 * r as f64 / (SIDE - 1) as f64
        }
    })
}

/// Near floor fading to a far horizon, with a slight left-right tilt.
pub fn corridor(w: usize, h: usize) -> DepthImage {
    scene(w, h, |r, c| {
        0.15 + 0.7 * r as f64 / (h - 1) as f64 + 0.05 * c as f64 / (w - 1) as f64
    })
}

pub fn write_png(dir: &Path, name: &str, img: &DepthImage) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, encode_png(img)).unwrap();
    p
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_pathfinder")
}

/// Minimal HTTP/1.1 client: returns (status, body).
pub fn http(
    port: u16,
    method: &str,
    path: &str,
    body: Option<&str>,
) -> std::io::Result<(u16, String)> {
    let mut s = TcpStream::connect(("127.0.0.1", port))?;
    s.set_read_timeout(Some(Duration::from_secs(10)))?;
    let body = body.unwrap_or("");
    write!(
        s,
        "{method} {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{body}",
        body.len()
    )?;
    let mut buf = Vec::new();
    s.read_to_end(&mut buf)?;
    let text = String::from_utf8_lossy(&buf).into_owned();
    let status = text
        .split_whitespace()
        .nth(1)
        .and_then(|c| c.parse().ok())
        .unwrap_or(0);
    let (head, rest) = text.split_once("\r\n\r\n").unwrap_or((&text, ""));
    let body = if head
        .to_ascii_lowercase()
        .contains("transfer-encoding: chunked")
    {
        dechunk(rest)
    } else {
        rest.to_owned()
    };
    Ok((status, body))
}

fn dechunk(mut s: &str) -> String {
    let mut out = String::new();
    while let Some((size, rest)) = s.split_once("\r\n") {
        let n = usize::from_str_radix(size.trim(), 16).unwrap_or(0);
        if n == 0 {
            break;
        }
        out.push_str(&rest[..n]);
        s = &rest[n + 2..];
    }
    out
}

pub fn free_port() -> u16 {
    std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port()
}

/// Removes every `time_s`/`avg_response_time_s` field from a JSON value.
pub fn strip_timing(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Object(m) => {
            m.remove("time_s");
            m.remove("avg_response_time_s");
            m.values_mut().for_each(strip_timing);
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(strip_timing),
        _ => {}
    }
}
