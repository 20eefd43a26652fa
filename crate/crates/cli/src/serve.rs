use std::io::Write;
use std::sync::Arc;

use dialclean_core::model::PipelineConfig;
use dialclean_service::http;
use dialclean_service::settings::system_clock;
use dialclean_service::{QualificationSpec, Service, Settings};
use serde_json::json;
use tokio::net::TcpListener;

use crate::error::CliError;
use crate::ServeArgs;

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        use tokio::signal::unix::{signal, SignalKind};
        match signal(SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
}

/// Prints one JSON line once listening, then serves until SIGINT or SIGTERM.
pub fn serve(a: &ServeArgs, cfg: &PipelineConfig) -> Result<(), CliError> {
    let qualification = match &a.qualification {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::data("io", format!("{}: {e}", path.display())))?;
            let spec: QualificationSpec = serde_json::from_str(&text)
                .map_err(|e| CliError::data("parse", format!("{}: {e}", path.display())))?;
            Some(Arc::new(spec.resolve()?))
        }
        None => None,
    };
    let settings = Settings {
        pipeline: cfg.clone(),
        lease_ms: a.lease_seconds.saturating_mul(1000),
        qualification,
        seed: a.seed,
        snapshot_every: a.snapshot_every,
        clock: system_clock(),
    };
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::data("io", e))?;
    rt.block_on(async {
        let listener = TcpListener::bind((a.bind.as_str(), a.port))
            .await
            .map_err(|e| CliError::data("bind", format!("{}:{}: {e}", a.bind, a.port)))?;
        let addr = listener
            .local_addr()
            .map_err(|e| CliError::data("bind", e))?;
        let service = Service::open(&a.data_dir, settings)?;
        let rec = service.recovery();
        let line = json!({
            "event": "listening",
            "address": addr.to_string(),
            "port": addr.port(),
            "seq": service.state().seq,
            "recovery": {
                "snapshot_seq": rec.snapshot_seq,
                "replayed": rec.replayed,
                "truncated_bytes": rec.truncated_bytes,
            },
            "config": cfg,
        });
        let mut stdout = std::io::stdout().lock();
        let _ = writeln!(stdout, "{line}");
        let _ = stdout.flush();
        drop(stdout);
        http::serve(listener, service, shutdown_signal())
            .await
            .map_err(|e| CliError::data("io", e))
    })
}
