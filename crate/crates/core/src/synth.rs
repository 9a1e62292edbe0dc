//! Synthetic provenance corpora with tunable log locality.
//!
//! Processes emit bursts of events from a small set of templates. Within a
//! burst each template parameter keeps its value unless mutated, so events
//! that end up adjacent in canonical edge order look alike. Shuffling
//! permutes attribute strings across records and destroys that locality
//! while keeping the graph structure.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{EdgeRecord, NodeRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub templates: usize,
    /// Number of edge records.
    pub records: usize,
    /// Probability that a parameter changes between consecutive events.
    pub mutation_rate: f64,
    pub shuffle: bool,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { templates: 20, records: 10_000, mutation_rate: 0.05, shuffle: false, seed: 0 }
    }
}

const WORDS: &[&str] = &[
    "nginx", "sshd", "bash", "python3", "java", "postgres", "cron", "systemd", "dockerd", "curl", "tar", "vim",
    "firefox", "sendmail", "apache2", "redis", "node", "rsync", "gzip", "sudo",
];
const SYSCALLS: &[&str] = &[
    "read", "write", "open", "openat", "close", "execve", "clone", "mmap", "connect", "accept", "sendto", "recvfrom",
    "unlink", "rename", "chmod", "stat", "fork", "socket", "bind", "pread64",
];
const FIELDS: &[&str] = &[
    "arch", "success", "exit", "a0", "a1", "a2", "a3", "items", "auid", "uid", "gid", "euid", "suid", "fsuid", "egid",
    "tty", "ses", "key", "flags", "size", "offset", "fd", "port", "proto",
];
const DIRS: &[&str] = &["etc", "var/log", "usr/lib", "home/alice", "tmp", "opt/app", "srv/www", "run"];
const EXTS: &[&str] = &["log", "conf", "so", "txt", "db", "pid", "sock", "tmp"];

#[derive(Debug, Clone)]
enum Segment {
    Fixed(String),
    Param { name: &'static str, hex: bool },
}

#[derive(Debug, Clone)]
struct Template {
    syscall: &'static str,
    segments: Vec<Segment>,
    /// Edge from object to process (reads) instead of process to object.
    inbound: bool,
}

fn make_template(rng: &mut ChaCha8Rng, index: usize) -> Template {
    let syscall = SYSCALLS[index % SYSCALLS.len()];
    let mut fields: Vec<&'static str> = FIELDS.to_vec();
    fields.shuffle(rng);
    let n = rng.gen_range(6..=11);
    let segments = fields[..n]
        .iter()
        .map(|&name| match rng.gen_range(0..3) {
            0 => Segment::Fixed(format!("{name}={}", rng.gen_range(0..1000))),
            1 => Segment::Param { name, hex: true },
            _ => Segment::Param { name, hex: false },
        })
        .collect();
    Template { syscall, segments, inbound: matches!(syscall, "read" | "recvfrom" | "accept" | "pread64") }
}

fn param_value(rng: &mut ChaCha8Rng, hex: bool) -> String {
    if hex {
        format!("{:x}", rng.gen::<u32>())
    } else {
        rng.gen_range(0..100_000u32).to_string()
    }
}

struct Process {
    node: u64,
    template: usize,
    params: Vec<String>,
    files: Vec<u64>,
    comm: &'static str,
}

/// Generates `(nodes, edges)` with dense ids in file order.
pub fn generate(config: &SynthConfig) -> (Vec<NodeRecord>, Vec<EdgeRecord>) {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let templates: Vec<Template> = (0..config.templates.max(1)).map(|i| make_template(&mut rng, i)).collect();
    let mut nodes: Vec<NodeRecord> = Vec::new();
    let mut edges: Vec<EdgeRecord> = Vec::new();
    let mut processes: Vec<Process> = Vec::new();
    let mut clock: u64 = 1_700_000_000_000;

    let new_node = |nodes: &mut Vec<NodeRecord>, attr: String| {
        let id = nodes.len() as u64;
        nodes.push(NodeRecord { external_id: id, attr: attr.into_bytes() });
        id
    };

    while edges.len() < config.records {
        let spawn = processes.is_empty() || rng.gen_bool(0.3);
        let pi = if spawn {
            let comm = WORDS[rng.gen_range(0..WORDS.len())];
            let pid = rng.gen_range(100..60_000);
            let attr = format!(
                "proc pid={pid} ppid={} exe=/usr/bin/{comm} uid={} cmd=\"{comm} --{}\"",
                rng.gen_range(1..pid),
                rng.gen_range(0..3) * 1000,
                WORDS[rng.gen_range(0..WORDS.len())]
            );
            let node = new_node(&mut nodes, attr);
            let template = rng.gen_range(0..templates.len());
            let params = templates[template]
                .segments
                .iter()
                .map(|s| match s {
                    Segment::Param { hex, .. } => param_value(&mut rng, *hex),
                    Segment::Fixed(_) => String::new(),
                })
                .collect();
            if let Some(parent) = processes.choose(&mut rng).map(|p| p.node) {
                if edges.len() < config.records {
                    clock += rng.gen_range(1..50);
                    let attr = format!("event=clone ts={clock} child={node}");
                    edges.push(EdgeRecord {
                        external_id: edges.len() as u64,
                        src: parent,
                        dst: node,
                        attr: attr.into_bytes(),
                    });
                }
            }
            processes.push(Process { node, template, params, files: Vec::new(), comm });
            processes.len() - 1
        } else {
            // recent processes are more likely to be active again
            let back = rng.gen_range(0..processes.len().min(8));
            processes.len() - 1 - back
        };

        let burst = rng.gen_range(1..=30);
        for _ in 0..burst {
            if edges.len() >= config.records {
                break;
            }
            let proc_ = &mut processes[pi];
            let tpl = &templates[proc_.template];
            let file = if proc_.files.is_empty() || rng.gen_bool(0.15) {
                let dir = DIRS[rng.gen_range(0..DIRS.len())];
                let attr = format!(
                    "file path=/{dir}/{}/{}.{} inode={} mode=0{}44",
                    proc_.comm,
                    WORDS[rng.gen_range(0..WORDS.len())],
                    EXTS[rng.gen_range(0..EXTS.len())],
                    rng.gen_range(10_000..9_999_999),
                    rng.gen_range(4..8)
                );
                let id = new_node(&mut nodes, attr);
                proc_.files.push(id);
                id
            } else {
                proc_.files[rng.gen_range(0..proc_.files.len())]
            };

            clock += rng.gen_range(1..20);
            let mut attr = format!("type=SYSCALL syscall={} ts={clock}", tpl.syscall);
            for (seg, value) in tpl.segments.iter().zip(proc_.params.iter_mut()) {
                match seg {
                    Segment::Fixed(text) => {
                        attr.push(' ');
                        attr.push_str(text);
                    }
                    Segment::Param { name, hex } => {
                        if rng.gen_bool(config.mutation_rate) {
                            *value = param_value(&mut rng, *hex);
                        }
                        attr.push_str(&format!(" {name}={value}"));
                    }
                }
            }
            attr.push_str(&format!(" comm=\"{}\"", proc_.comm));
            let (src, dst) = if tpl.inbound { (file, proc_.node) } else { (proc_.node, file) };
            edges.push(EdgeRecord { external_id: edges.len() as u64, src, dst, attr: attr.into_bytes() });
        }
    }

    if config.shuffle {
        let mut node_attrs: Vec<Vec<u8>> = nodes.iter_mut().map(|n| std::mem::take(&mut n.attr)).collect();
        node_attrs.shuffle(&mut rng);
        for (n, a) in nodes.iter_mut().zip(node_attrs) {
            n.attr = a;
        }
        let mut edge_attrs: Vec<Vec<u8>> = edges.iter_mut().map(|e| std::mem::take(&mut e.attr)).collect();
        edge_attrs.shuffle(&mut rng);
        for (e, a) in edges.iter_mut().zip(edge_attrs) {
            e.attr = a;
        }
    }
    (nodes, edges)
}
