import streamlit as st
from pathlib import Path
import sys
from datetime import datetime

# Add src to path
root_dir = Path(__file__).parent.parent.parent
sys.path.append(str(root_dir))

from src.backend import SensitivityBackend
from src.errors import TreeSobolError
from src.simulation.design import Scenario
from src.simulation.test_functions import FUNCTIONS

st.set_page_config(
    page_title="Run Scenario",
    page_icon="🧪",
    layout="wide"
)

# Initialize backend
@st.cache_resource
def get_backend():
    return SensitivityBackend()

backend = get_backend()

# Session state
if 'metric_row' not in st.session_state:
    st.session_state.metric_row = None

# Header
st.title("🧪 Run a Simulation Scenario")
st.write("Fit the sampler to synthetic data and compare its indices and split counts with the truth")

st.markdown("---")

col1, col2 = st.columns(2)
with col1:
    function = st.selectbox("Function", [name for name in FUNCTIONS if name != "count_demo"])
    p_ratio = st.selectbox("p / p0", [1, 2, 3])
    n_factor = st.selectbox("n / p", [10, 50])
    noise_ratio = st.selectbox("Noise variance / Var(f)", [0.10, 0.25])
with col2:
    replicates = st.number_input("Replicates", min_value=1, max_value=100, value=2)
    n_draws = st.number_input("Posterior draws", min_value=10, max_value=5000, value=200)
    n_burn = st.number_input("Burn-in", min_value=0, max_value=5000, value=200)
    m = st.number_input("Trees", min_value=1, max_value=500, value=50)
    truth_source = st.radio("Truth", ["published", "quadrature"], horizontal=True)

st.caption("Desk-scale settings; a full scenario takes minutes per replicate.")

if st.button("▶️ Run Scenario", type="primary", use_container_width=True):
    try:
        scenario = Scenario(
            function=function,
            p_ratio=p_ratio,
            n_factor=n_factor,
            noise_ratio=noise_ratio,
            replicates=int(replicates),
            n_draws=int(n_draws),
            truth_source=truth_source,
            sampler={"m": int(m), "n_burn": int(n_burn)},
        )
        with st.spinner(f"Running {scenario.id}..."):
            st.session_state.metric_row = backend.run_scenario(scenario, progress=False)
        st.success("✅ Scenario complete!")
    except TreeSobolError as e:
        st.error(f"❌ Error: {str(e)}")

# Display results
if st.session_state.metric_row is not None:
    row = st.session_state.metric_row
    st.markdown("---")
    st.subheader(f"📊 {row.scenario}")

    col1, col2, col3, col4 = st.columns(4)
    with col1:
        st.metric("L1 (first-order)", f"{row.mean['l1_S']:.3f}")
    with col2:
        st.metric("L1 (total effects)", f"{row.mean['l1_T']:.3f}")
    with col3:
        st.metric("d_r (indices)", f"{row.mean['dr_S']:.2f}")
    with col4:
        st.metric("d_r (counts)", f"{row.mean['dr_count_S']:.2f}")

    st.dataframe(row.to_frame(), use_container_width=True)
    st.subheader("📋 Per-Replicate Metrics")
    replicates_df = row.replicates_frame()
    st.dataframe(replicates_df, use_container_width=True)

    timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
    st.download_button(
        label="📥 Download Metrics (CSV)",
        data=replicates_df.to_csv(index=False).encode('utf-8'),
        file_name=f"scenario_metrics_{timestamp}.csv",
        mime="text/csv",
        use_container_width=True,
        type="primary"
    )
