//! Stand-in for the BERTScore sidecar: speaks the same protocol over
//! stdin/stdout (default) or on a TCP address (`--listen ADDR`), scoring
//! with `stub_scores`. Useful for exercising the pipeline without a model.

use std::io::{self, BufReader};
use std::net::TcpListener;

use udprompt_metrics::bertscore::{serve_stub, stub_scores, ModelInfo, STUB_MODEL_ID};

fn main() -> io::Result<()> {
    let model = ModelInfo {
        model_id: STUB_MODEL_ID.to_owned(),
        rescale_with_baseline: false,
    };
    let args: Vec<String> = std::env::args().skip(1).collect();
    match args.as_slice() {
        [] => serve_stub(BufReader::new(io::stdin().lock()), io::stdout().lock(), &model, stub_scores),
        [flag, addr] if flag == "--listen" => {
            let listener = TcpListener::bind(addr)?;
            eprintln!("listening on {}", listener.local_addr()?);
            for stream in listener.incoming() {
                let stream = stream?;
                serve_stub(BufReader::new(stream.try_clone()?), stream, &model, stub_scores)?;
            }
            Ok(())
        }
        _ => {
            eprintln!("usage: stub-sidecar [--listen ADDR]");
            std::process::exit(2);
        }
    }
}
