//! The HTTP service embedded in another program, backed by the mocks.
//!
//! ```text
//! cargo run --example serve_api
//! curl -s localhost:8080/api/process -H 'content-type: application/json' -d '{"text":"I eat sushi"}'
//! curl -s localhost:8080/api/vocabulary
//! ```

use std::sync::Arc;

use salad::app::App;
use salad::http::{router, serve, RouterOptions};
use salad::{ProviderSet, StoreRoot, TemplateLibrary};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data_dir = std::env::temp_dir().join("salad-serve-example");
    let app = App::open(StoreRoot::init(&data_dir)?, ProviderSet::mock(), TemplateLibrary::builtin())?;
    let listener = tokio::net::TcpListener::bind("127.0.0.1:8080").await?;
    println!("listening on http://{} (store in {})", listener.local_addr()?, data_dir.display());
    serve(listener, router(Arc::new(app), &RouterOptions::default())).await?;
    Ok(())
}
