import streamlit as st
from pathlib import Path
import sys

# Add src to path
root_dir = Path(__file__).parent.parent.parent
sys.path.append(str(root_dir))

from src.backend import SensitivityBackend
from src.errors import TreeSobolError

st.set_page_config(
    page_title="Fit Sampler",
    page_icon="🎲",
    layout="wide"
)

# Initialize backend
@st.cache_resource
def get_backend():
    return SensitivityBackend()

backend = get_backend()

# Session state
if 'draws' not in st.session_state:
    st.session_state.draws = None

# Header
st.title("🎲 Fit the BART Sampler")
st.write("Upload training data, draw a posterior and compute its indices")

st.markdown("---")

with st.expander("📋 File Format"):
    st.write("""
    **Data file** (CSV): one numeric column per input followed by a final `y`
    column. Inputs must lie in the unit cube.
    """)

uploaded_file = st.file_uploader("Choose a CSV file", type=["csv"])

if uploaded_file is not None:
    try:
        data, stats = backend.load_data(uploaded_file)

        col1, col2, col3, col4 = st.columns(4)
        with col1:
            st.metric("Observations", stats['n'])
        with col2:
            st.metric("Inputs", stats['p'])
        with col3:
            st.metric("Mean y", f"{stats['y_mean']:.4g}")
        with col4:
            st.metric("SD y", f"{stats['y_sd']:.4g}")
        if stats['constant_y']:
            st.warning("⚠️ The response is constant; every posterior draw will have zero variance")

        col1, col2, col3 = st.columns(3)
        with col1:
            m = st.number_input("Trees", min_value=1, max_value=500, value=50)
        with col2:
            n_draws = st.number_input("Posterior draws", min_value=10, max_value=5000, value=200)
        with col3:
            n_burn = st.number_input("Burn-in", min_value=0, max_value=5000, value=200)

        if st.button("▶️ Fit", type="primary", use_container_width=True):
            with st.spinner("Sampling..."):
                st.session_state.draws = backend.fit(
                    data, {"m": int(m), "n_draws": int(n_draws), "n_burn": int(n_burn), "progress": False}
                )
            st.success(f"✅ Drew {len(st.session_state.draws)} posterior samples")

        if st.session_state.draws:
            draws = st.session_state.draws
            st.download_button(
                label="📥 Download Posterior (JSON)",
                data=backend.posterior_json(draws).encode('utf-8'),
                file_name="posterior.json",
                mime="application/json",
            )

            st.subheader("📊 Posterior Summary")
            posterior = backend.compute_indices([d.ensemble for d in draws], max_order=1)
            st.dataframe(posterior.summary(), use_container_width=True)

    except TreeSobolError as e:
        st.error(f"❌ Error: {str(e)}")

else:
    st.info("👆 Please upload a CSV file to continue")
