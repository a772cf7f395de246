import streamlit as st
from pathlib import Path
import sys

# Add src to path
root_dir = Path(__file__).parent.parent.parent
sys.path.append(str(root_dir))

from src.backend import SensitivityBackend
from src.config.settings import settings
from src.errors import TreeSobolError

st.set_page_config(
    page_title="Compute Indices",
    page_icon="🌳",
    layout="wide"
)

# Initialize backend
@st.cache_resource
def get_backend():
    return SensitivityBackend()

backend = get_backend()

# Header
st.title("🌳 Compute Sobol' Indices")
st.write("Upload an ensemble or a posterior file to compute its exact sensitivity indices")

st.markdown("---")

# Instructions
with st.expander("📋 File Format"):
    st.write("""
    **Ensemble file** (JSON):
```
    {"domain": {"lo": [0, 0], "hi": [1, 1]},
     "trees": [{"split": {"dim": 1, "cut": 0.5},
                "left": {"leaf": 1.0}, "right": {"leaf": 2.0}}]}
```
    Dimensions are 1-based. A **posterior file** is a JSON list of such
    objects, each with an extra `sigma` field.
    """)

max_order = st.slider("Highest interaction order", min_value=1, max_value=4, value=settings.max_order)

uploaded_file = st.file_uploader("Choose a JSON file", type=["json"])

if uploaded_file is not None:
    try:
        ensembles = backend.load_ensembles(uploaded_file)
        st.success(f"✅ Loaded **{len(ensembles)}** ensemble(s), p = {ensembles[0].p}")

        with st.spinner("Computing indices..."):
            posterior = backend.compute_indices(ensembles, max_order=max_order)

        col1, col2, col3 = st.columns(3)
        with col1:
            st.metric("Draws", len(ensembles))
        with col2:
            st.metric("Zero-variance draws", posterior.n_degenerate)
        with col3:
            st.metric("Mean total variance", f"{posterior.mean.total_variance:.4g}")

        st.subheader("📊 Posterior Summary")
        summary = posterior.summary()
        st.dataframe(summary, use_container_width=True)
        st.download_button(
            label="📥 Download Summary (CSV)",
            data=summary.to_csv(index=False).encode('utf-8'),
            file_name="sobol_summary.csv",
            mime="text/csv",
        )

        st.subheader("🔢 Split Counts vs First-Order Indices")
        counts = backend.count_table(ensembles, posterior)
        st.dataframe(counts.groupby("var")[["count", "unique_rules", "S"]].mean(), use_container_width=True)
        st.download_button(
            label="📥 Download Per-Draw Counts (CSV)",
            data=counts.to_csv(index=False).encode('utf-8'),
            file_name="counts_vs_indices.csv",
            mime="text/csv",
        )

    except TreeSobolError as e:
        st.error(f"❌ Error: {str(e)}")

else:
    st.info("👆 Please upload a JSON file to continue")
