package org.apache.shardingsphere.elasticjob.tracing;

import org.apache.shardingsphere.elasticjob.infra.env.BootstrapEnvironment;
import org.apache.shardingsphere.elasticjob.test.util.ReflectionUtils;
import org.junit.Test;

import java.util.Map;
import java.util.Properties;

import static org.hamcrest.CoreMatchers.is;
import static org.junit.Assert.assertFalse;
import static org.junit.Assert.assertThat;
import static org.junit.Assert.assertTrue;

public final class BootstrapEnvironmentTest {

    private static BootstrapEnvironment bootstrapEnvironment = BootstrapEnvironment.getINSTANCE();

    @Test
    public void assertGetEventTraceRdbConfigurationMap() {
        Properties properties = new Properties();
        properties.setProperty(BootstrapEnvironment.EnvironmentArgument.EVENT_TRACE_RDB_DRIVER.getKey(), "org.h2.Driver");
        properties.setProperty(BootstrapEnvironment.EnvironmentArgument.EVENT_TRACE_RDB_URL.getKey(), "jdbc:h2:mem:job_event_trace");
        properties.setProperty(BootstrapEnvironment.EnvironmentArgument.EVENT_TRACE_RDB_USERNAME.getKey(), "sa");
        properties.setProperty(BootstrapEnvironment.EnvironmentArgument.EVENT_TRACE_RDB_PASSWORD.getKey(), "password");
        ReflectionUtils.setFieldValue(bootstrapEnvironment, "properties", properties);
        Map<String, String> result = bootstrapEnvironment.getJobEventRdbConfigurationMap();
        assertThat(result.size(), is(4));
        assertThat(result.get(BootstrapEnvironment.EnvironmentArgument.EVENT_TRACE_RDB_DRIVER.getKey()), is("org.h2.Driver"));
    }

    @Test
    public void assertWithoutEventTraceRdbConfiguration() {
        assertFalse(bootstrapEnvironment.getTracingConfiguration().isPresent());
    }

    @Test
    public void assertGetFrameworkHostPort() {
        assertTrue(bootstrapEnvironment.getFrameworkHostPort() > 0);
    }
}
