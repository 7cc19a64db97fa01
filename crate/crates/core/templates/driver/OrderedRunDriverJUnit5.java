package flakemend_driver;

import static org.junit.platform.engine.discovery.DiscoverySelectors.selectMethod;

import java.io.PrintWriter;
import java.io.StringWriter;
import java.nio.charset.StandardCharsets;
import java.nio.file.Files;
import java.nio.file.Path;
import java.nio.file.Paths;
import java.util.ArrayList;
import java.util.Base64;
import java.util.List;

import org.junit.jupiter.api.Test;
import org.junit.platform.launcher.Launcher;
import org.junit.platform.launcher.LauncherDiscoveryRequest;
import org.junit.platform.launcher.core.LauncherDiscoveryRequestBuilder;
import org.junit.platform.launcher.core.LauncherFactory;
import org.junit.platform.launcher.listeners.SummaryGeneratingListener;
import org.junit.platform.launcher.listeners.TestExecutionSummary;

/** Runs the tests listed in target/flakemend/sequence.txt, in order, in this JVM. */
public class OrderedRunDriver {

    @Test
    public void runSequence() throws Exception {
        Path dir = Paths.get("target", "flakemend");
        List<String> sequence = Files.readAllLines(dir.resolve("sequence.txt"), StandardCharsets.UTF_8);
        List<String> out = new ArrayList<>();
        Launcher launcher = LauncherFactory.create();
        for (String raw : sequence) {
            String id = raw.trim();
            if (id.isEmpty()) {
                continue;
            }
            try {
                Class.forName(id.substring(0, id.indexOf('#')));
            } catch (ClassNotFoundException e) {
                out.add("NOTFOUND\t" + id);
                continue;
            }
            LauncherDiscoveryRequest request = LauncherDiscoveryRequestBuilder.request()
                    .selectors(selectMethod(id))
                    .build();
            SummaryGeneratingListener listener = new SummaryGeneratingListener();
            long start = System.nanoTime();
            launcher.execute(request, listener);
            double seconds = (System.nanoTime() - start) / 1e9;
            TestExecutionSummary summary = listener.getSummary();
            if (summary.getTestsFoundCount() == 0) {
                out.add("NOTFOUND\t" + id);
            } else if (summary.getTotalFailureCount() == 0) {
                out.add("PASS\t" + id + "\t" + seconds);
            } else {
                Throwable failure = summary.getFailures().get(0).getException();
                StringWriter trace = new StringWriter();
                failure.printStackTrace(new PrintWriter(trace));
                out.add("FAIL\t" + id + "\t" + seconds + "\t" + encode(String.valueOf(failure.getMessage()))
                        + "\t" + encode(trace.toString()));
            }
        }
        Files.write(dir.resolve("results.txt"), out, StandardCharsets.UTF_8);
    }

    private static String encode(String text) {
        return Base64.getEncoder().encodeToString(text.getBytes(StandardCharsets.UTF_8));
    }
}
